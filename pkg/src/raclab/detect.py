"""Tests for "no transmitter is active" from ``n0`` channel outputs.

Outputs are indices into the global alphabet, whose order is also the order
on the real line used by the Kolmogorov-Smirnov test (the adder erasure
symbol is last, above every numeric output).  All logs are natural.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import ceil, log, sqrt

import numpy as np
from scipy.special import gammaln
from scipy.stats import norm

from . import _mc
from .infodensity import kl_divergence, output_pmf

KINDS = ("hoeffding", "ks", "llr")


@dataclass
class TestSpec:
    """A zero-transmitter test: statistic kind, threshold and hypotheses."""

    __test__ = False

    kind: str
    threshold: object
    null: np.ndarray
    alternatives: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown test kind {self.kind!r}")
        self.null = np.asarray(self.null, dtype=float)
        if self.kind == "llr":
            if not self.alternatives:
                raise ValueError("llr test needs alternatives")
            for q in self.alternatives:
                if not np.isfinite(kl_divergence(self.null, q)):
                    raise ValueError("llr alternatives must dominate the null")
            self.threshold = np.broadcast_to(np.asarray(self.threshold, float),
                                             (len(self.alternatives),)).copy()
        elif self.threshold < 0:
            raise ValueError("threshold must be nonnegative")

    def accepts_null(self, counts):
        """Boolean per row of ``counts``: decide that nobody is transmitting."""
        counts = np.atleast_2d(counts)
        if self.kind == "hoeffding":
            return hoeffding_from_counts(counts, self.null) <= self.threshold
        if self.kind == "ks":
            return ks_from_counts(counts, self.null) <= self.threshold
        h = llr_from_counts(counts, self.null, self.alternatives)
        return np.all(h >= self.threshold, axis=1)


def _counts(samples, size):
    samples = np.asarray(samples, dtype=int).ravel()
    if samples.size == 0:
        raise ValueError("empty sample")
    if samples.min() < 0 or samples.max() >= size:
        raise ValueError("sample symbol out of alphabet")
    return np.bincount(samples, minlength=size)


def hoeffding_from_counts(counts, null):
    """``D(P_hat || null)`` per row; ``+inf`` when ``P_hat`` leaves the null support."""
    counts = np.atleast_2d(np.asarray(counts, dtype=float))
    n = counts.sum(axis=1, keepdims=True)
    phat = counts / n
    null = np.asarray(null, dtype=float)
    out = np.zeros(counts.shape[0])
    outside = np.any(phat[:, null == 0] > 0, axis=1)
    sup = null > 0
    ph = phat[:, sup]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(ph > 0, ph * (np.log(ph) - np.log(null[sup])), 0.0)
    out[:] = np.maximum(terms.sum(axis=1), 0.0)
    out[outside] = np.inf
    return out


def hoeffding_statistic(samples, null):
    """Relative entropy of the empirical distribution from the null, in nats."""
    null = np.asarray(null, dtype=float)
    return float(hoeffding_from_counts(_counts(samples, null.size), null)[0])


def ks_from_counts(counts, null):
    """``max |F_hat - F_0|`` per row over the ordered discrete alphabet."""
    counts = np.atleast_2d(np.asarray(counts, dtype=float))
    ecdf = np.cumsum(counts, axis=1) / counts.sum(axis=1, keepdims=True)
    return np.max(np.abs(ecdf - np.cumsum(null)), axis=1)


def ks_statistic(samples, F0):
    """Kolmogorov-Smirnov distance between the sample and ``F0``.

    ``F0`` is either a pmf over the ordered discrete output alphabet (samples
    are symbol indices) or a callable CDF on the real line (samples are reals;
    both the values at and the left limits before each sample are checked).
    """
    if callable(F0):
        x = np.sort(np.asarray(samples, dtype=float).ravel())
        if x.size == 0:
            raise ValueError("empty sample")
        n = x.size
        F = np.asarray(F0(x), dtype=float)
        i = np.arange(1, n + 1)
        return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))
    null = np.asarray(F0, dtype=float)
    return float(ks_from_counts(_counts(samples, null.size), null)[0])


def llr_vector(null, alternatives):
    """Per-symbol LLR ``log P_Y0(y)/P_Yk(y)`` on the null support, shape (|Y|, K)."""
    null = np.asarray(null, float)
    alts = np.atleast_2d(np.asarray(alternatives, float))
    out = np.zeros((null.size, alts.shape[0]))
    sup = null > 0
    with np.errstate(divide="ignore"):
        out[sup] = np.log(null[sup])[:, None] - np.log(alts[:, sup].T)
    out[~sup] = -np.inf
    return out


def llr_from_counts(counts, null, alternatives):
    h = llr_vector(null, alternatives)
    counts = np.atleast_2d(np.asarray(counts, float))
    finite = np.where(np.isfinite(h), h, 0.0)
    out = counts @ finite
    bad = counts[:, ~np.isfinite(h).all(axis=1)].sum(axis=1) > 0
    out[bad] = -np.inf
    return out


def thresholds(kind, n, eps0, alphabet_size=None, base="e"):
    """Default threshold ``gamma_0`` for a test on ``n`` outputs.

    Hoeffding: ``|Y| log(n) / n`` (natural log unless ``base='2'``).
    KS: ``sqrt(log(2/eps0) / (2n))``, the DKW level for type-I error ``eps0``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if kind == "hoeffding":
        if alphabet_size is None:
            raise ValueError("Hoeffding threshold needs the output alphabet size")
        lg = log(n) if base == "e" else log(n, 2)
        return alphabet_size * lg / n
    if kind == "ks":
        if not eps0 > 0:
            raise ValueError("eps0 must be positive")
        return sqrt(log(2 / eps0) / (2 * n)) if eps0 < 2 else 0.0
    raise ValueError(f"no default threshold for {kind!r}")


@dataclass
class TestErrors:
    """Monte Carlo type-I and type-II error estimates."""

    __test__ = False

    kind: str
    n0: int
    gamma0: object
    trials: int
    seed: int
    alpha: float
    alpha_se: float
    alpha_ci: tuple
    beta: list
    beta_se: list
    beta_ci: list

    def to_dict(self):
        g = self.gamma0
        return {
            "test": self.kind, "n0": self.n0,
            "gamma0": g.tolist() if isinstance(g, np.ndarray) else g,
            "trials": self.trials, "seed": self.seed,
            "alpha": self.alpha, "alpha_se": self.alpha_se, "alpha_ci": list(self.alpha_ci),
            "beta": self.beta, "beta_se": self.beta_se, "beta_ci": [list(c) for c in self.beta_ci],
        }


def count_acceptances(spec, pmf, n0, trials, seed, key, threads=None):
    """How many of ``trials`` i.i.d. ``pmf`` samples of length ``n0`` accept the null."""
    def work(chunk):
        idx, c = chunk
        rng = _mc.stream(seed, *key, idx)
        counts = rng.multinomial(n0, pmf, size=c)
        return int(np.count_nonzero(spec.accepts_null(counts)))

    return sum(_mc.pmap(work, _mc.chunks(trials), threads))


def estimate_test_errors(ch, px, kind, n0, gamma0, trials, seed, threads=None, min_trials=10**4):
    """MC type-I error under ``P_Y0`` and type-II errors under each ``P_Yk``.

    With ``k`` users sending i.i.d. ``px`` inputs through a memoryless channel,
    the outputs are i.i.d. ``P_Yk``, so each length-``n0`` sample is drawn as a
    multinomial count vector.
    """
    if n0 < 1:
        raise ValueError("n0 must be at least 1")
    trials = _mc.check_trials(trials, min_trials)
    pmfs = [output_pmf(ch, px, k) for k in range(ch.K + 1)]
    alts = pmfs[1:] if kind == "llr" else []
    spec = TestSpec(kind, gamma0, pmfs[0], alts)
    acc0 = count_acceptances(spec, pmfs[0], n0, trials, seed, (0,), threads)
    rej0 = trials - acc0
    beta, se, ci = [], [], []
    for k in range(1, ch.K + 1):
        acc = count_acceptances(spec, pmfs[k], n0, trials, seed, (k,), threads)
        beta.append(acc / trials)
        se.append(_mc.binomial_se(acc, trials))
        ci.append(_mc.wilson_interval(acc, trials))
    return TestErrors(kind, int(n0), gamma0, trials, int(seed), rej0 / trials,
                      _mc.binomial_se(rej0, trials), _mc.wilson_interval(rej0, trials),
                      beta, se, ci)


def compositions(n, m):
    """All length-``m`` nonnegative integer vectors summing to ``n``."""
    if m == 1:
        return np.array([[n]])
    rows = []
    for bars in itertools.combinations(range(n + m - 1), m - 1):
        b = (-1,) + bars + (n + m - 1,)
        rows.append([b[i + 1] - b[i] - 1 for i in range(m)])
    return np.array(rows, dtype=int)


def multinomial_logpmf(counts, pmf):
    """Log multinomial probabilities of count rows (``-inf`` where impossible)."""
    counts = np.atleast_2d(counts)
    n = counts.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        lp = np.log(np.asarray(pmf, float))
        terms = np.where(counts > 0, counts * lp, 0.0)
    return gammaln(n + 1) - gammaln(counts + 1).sum(axis=1) + terms.sum(axis=1)


def exact_acceptance(spec, pmf, n):
    """Exact ``P[test accepts the null]`` for ``n`` i.i.d. ``pmf`` outputs.

    Types are enumerated over the symbols that ``pmf`` can produce.  For the
    Hoeffding test only types inside the null support can be accepted, so the
    enumeration is further restricted there.
    """
    pmf = np.asarray(pmf, float)
    live = pmf > 0
    if spec.kind == "hoeffding":
        live &= spec.null > 0
    idx = np.flatnonzero(live)
    if idx.size == 0:
        return 0.0
    comp = compositions(n, idx.size)
    counts = np.zeros((comp.shape[0], pmf.size), dtype=int)
    counts[:, idx] = comp
    acc = spec.accepts_null(counts)
    if not np.any(acc):
        return 0.0
    lp = multinomial_logpmf(counts[acc], pmf)
    top = lp.max()
    return float(np.exp(top) * np.sum(np.exp(lp - top)))


def log_exact_acceptance(spec, pmf, n):
    """``log P[accept]`` for deep tails where :func:`exact_acceptance` underflows."""
    pmf = np.asarray(pmf, float)
    live = pmf > 0
    if spec.kind == "hoeffding":
        live &= spec.null > 0
    idx = np.flatnonzero(live)
    comp = compositions(n, idx.size)
    counts = np.zeros((comp.shape[0], pmf.size), dtype=int)
    counts[:, idx] = comp
    acc = spec.accepts_null(counts)
    if not np.any(acc):
        return -np.inf
    lp = multinomial_logpmf(counts[acc], pmf)
    top = lp.max()
    return float(top + np.log(np.sum(np.exp(lp - top))))


@dataclass
class MinimaxResult:
    divergences: list
    D_min: float
    I_min: list
    V_min: np.ndarray
    b: float
    singular: bool
    achieved: float = float("nan")

    def to_dict(self):
        return {"divergences": self.divergences, "D_min": self.D_min, "I_min": self.I_min,
                "V_min": np.atleast_2d(self.V_min).tolist(), "b": self.b, "singular": self.singular}


def minimax_quantile(null, alternatives, eps0, mc_trials=200_000, seed=0, tol=1e-3):
    """Smallest divergence, its argmin set and the quantile ``b``.

    ``b`` solves ``P[Z <= b 1] = 1 - eps0`` for ``Z ~ N(0, V_min)``, where
    ``V_min`` is the covariance under the null of the per-symbol LLRs of the
    closest alternatives.  Exactly repeated alternatives are merged first
    (they make ``V_min`` singular without changing the test).  In one
    dimension ``b = sigma Q^-1(eps0)``; otherwise the Gaussian orthant
    probability is estimated by Monte Carlo with antithetic pairs and ``b`` is
    found by bisection.  Returns ``b = None`` when ``V_min`` is singular.
    """
    if not 0 < eps0 < 1:
        raise ValueError("eps0 must lie in (0, 1)")
    null = np.asarray(null, float)
    alts = [np.asarray(q, float) for q in alternatives]
    D = [kl_divergence(null, q) for q in alts]
    if not all(np.isfinite(d) for d in D):
        raise ValueError("every alternative must dominate the null (finite divergence)")
    D_min = min(D)
    scale = max(abs(D_min), 1.0)
    I_min = [k + 1 for k, d in enumerate(D) if d <= D_min + 1e-12 * scale]
    reps = []
    for k in I_min:
        if not any(np.array_equal(alts[k - 1], alts[j - 1]) for j in reps):
            reps.append(k)
    h = llr_vector(null, [alts[k - 1] for k in reps])
    sup = null > 0
    hc = h[sup] - (null[sup] @ h[sup])
    V = (hc * null[sup, None]).T @ hc
    if len(reps) == 1:
        var = float(V[0, 0])
        if var <= 1e-15:
            return MinimaxResult(D, D_min, I_min, V, None, True)
        b = sqrt(var) * float(norm.isf(eps0))
        return MinimaxResult(D, D_min, I_min, V, b, False, 1 - eps0)
    ev = np.linalg.eigvalsh(V)
    if ev.min() <= 1e-12 * max(ev.max(), 1e-300):
        return MinimaxResult(D, D_min, I_min, V, None, True)
    L = np.linalg.cholesky(V)
    rng = _mc.stream(seed, 0)
    half = (mc_trials + 1) // 2
    G = rng.standard_normal((half, len(reps)))
    Z = np.vstack([G, -G]) @ L.T
    mx = Z.max(axis=1)
    sd = sqrt(ev.max())
    lo, hi = -10 * sd, 10 * sd
    target = 1 - eps0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        P = np.mean(mx <= mid)
        if abs(P - target) <= tol and hi - lo < 1e-6 * sd:
            break
        if P < target:
            lo = mid
        else:
            hi = mid
    b = 0.5 * (lo + hi)
    return MinimaxResult(D, D_min, I_min, V, b, False, float(np.mean(mx <= b)))


def n0_expansion(D_min, b, n1):
    """Zero-test length from the minimax type-II expansion, at least 1."""
    if not D_min > 0:
        raise ValueError("D_min must be positive")
    if n1 < 3:
        raise ValueError("n1 must be at least 3")
    L = log(n1)
    val = L / (2 * D_min) + b * sqrt(L) / sqrt(2 * D_min**3) - log(L) / (2 * D_min)
    return max(1, ceil(val))
