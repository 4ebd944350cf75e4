"""Term-by-term evaluation of the random-coding error bound of the threshold code.

For ``k`` active users the bound is the sum of

* ``dominating``     P[i_k(X_[k]; Y_k) <= log g_k] at ``n_k``
* ``zero_test``      P[zero test accepts silence] at ``n_0``
* ``repetition``     P[two users pick the same message]  (exact)
* ``wrong_time``     sum_t C(k,t) P[i_t(X_[t]; Y_k) > log g_t]               (t < k)
* ``confuse_self``   sum C(k,t-s) P[i_t(X_[s+1:t]; Y_k) > n_t E[.] + lam_st]  (s < t)
* ``confuse_other``  sum C(k,t-s) C(M-k,s)
                     P[i_t(Xbar_[s]; Y_k | X_[s+1:t]) > log g_t - n_t E[.] - lam_st]

Every probability is of the form ``P[sum of n i.i.d. letters <> threshold]``
where a letter is a single-letter density drawn under the ``k``-user channel.
A letter distribution is a finite list of atoms, so a length-``n`` sum is
determined by a multinomial count vector: Monte Carlo draws count vectors
and the exact oracle enumerates them.  A single ``-inf`` letter makes the sum
``-inf``.  For ``k = 0`` the bound is the zero-test false-alarm probability.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, exp, lgamma, log, log1p, expm1

import numpy as np

from . import _mc
from .detect import TestSpec, exact_acceptance, compositions, multinomial_logpmf
from .infodensity import density_pmf, output_pmf, statistics

TERMS = ("dominating", "zero_test", "repetition", "wrong_time", "confuse_self", "confuse_other")
_TERM_ID = {name: i for i, name in enumerate(TERMS)}
MIN_TRIALS = 10**4


def repetition_probability(M, k):
    """``1 - prod_{i<k} (M - i) / M`` computed in the log domain."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > M:
        raise ValueError(f"k={k} exceeds M={M}")
    return float(-expm1(sum(log1p(-i / M) for i in range(k))))


def log_comb(n, r):
    if r < 0 or r > n:
        return -np.inf
    return lgamma(n + 1) - lgamma(r + 1) - lgamma(n - r + 1)


def density_sums(counts, values):
    """Sums for count rows over atoms ``values`` (``-inf`` if a ``-inf`` atom is hit)."""
    counts = np.atleast_2d(counts)
    fin = np.isfinite(values)
    s = counts[:, fin] @ values[fin]
    if not fin.all():
        s = np.where(counts[:, ~fin].sum(axis=1) > 0, -np.inf, s)
    return s


TIE_RTOL = 1e-9


def tie_tolerance(threshold):
    """Sums this close to a threshold are treated as equal to it (lattice ties)."""
    return TIE_RTOL * max(1.0, abs(threshold))


def _event(sums, threshold, upper):
    tol = tie_tolerance(threshold)
    return sums > threshold + tol if upper else sums <= threshold + tol


def mc_tail(values, probs, n, threshold, upper, trials, seed, key, threads=None):
    """Hit count of ``sum > threshold`` (``upper``) or ``sum <= threshold``."""
    def work(chunk):
        idx, c = chunk
        rng = _mc.stream(seed, *key, idx)
        counts = rng.multinomial(n, probs, size=c)
        return int(np.count_nonzero(_event(density_sums(counts, values), threshold, upper)))

    return sum(_mc.pmap(work, _mc.chunks(trials), threads))


def exact_tail(values, probs, n, threshold, upper):
    """Exact tail probability by enumerating all count vectors."""
    comp = compositions(n, len(values))
    hit = _event(density_sums(comp, values), threshold, upper)
    if not np.any(hit):
        return 0.0
    lp = multinomial_logpmf(comp[hit], probs)
    return float(np.sum(np.exp(lp)))


@dataclass
class Component:
    """One ``(t, s)`` summand of a bound term."""

    term: str
    t: int
    s: int
    n: int
    threshold: float
    log_prefactor: float
    probability: float
    se: float
    method: str
    hits: int = -1

    @property
    def prefactor(self):
        return exp(self.log_prefactor) if np.isfinite(self.log_prefactor) else 0.0

    @property
    def value(self):
        if self.probability == 0.0 or not np.isfinite(self.log_prefactor):
            return 0.0
        return exp(self.log_prefactor + log(self.probability))

    @property
    def value_se(self):
        return self.prefactor * self.se

    @property
    def below_resolution(self):
        return self.method == "mc" and self.hits == 0 and self.prefactor > 0

    def to_dict(self):
        return {"term": self.term, "t": self.t, "s": self.s, "n": self.n,
                "threshold": self.threshold, "prefactor": self.prefactor,
                "probability": self.probability, "se": self.se, "value": self.value,
                "method": self.method, "below_resolution": self.below_resolution}


@dataclass
class ErrorBoundReport:
    """Per-term bound values for ``k`` active users, with MC standard errors."""

    k: int
    method: str
    trials: int
    seed: int
    components: list = field(default_factory=list)

    def term(self, name):
        return sum(c.value for c in self.components if c.term == name)

    def term_se(self, name):
        return float(np.sqrt(sum(c.value_se**2 for c in self.components if c.term == name)))

    @property
    def raw_total(self):
        return sum(c.value for c in self.components)

    @property
    def total(self):
        return min(1.0, self.raw_total)

    @property
    def total_se(self):
        return float(np.sqrt(sum(c.value_se**2 for c in self.components)))

    @property
    def below_resolution(self):
        return [(c.term, c.t, c.s) for c in self.components if c.below_resolution]

    def to_dict(self):
        d = {"k": self.k, "method": self.method, "trials": self.trials, "seed": self.seed,
             "total": self.total, "raw_total": self.raw_total, "total_se": self.total_se,
             "components": [c.to_dict() for c in self.components]}
        for name in TERMS:
            d[f"term_{name}"] = min(1.0, self.term(name))
            d[f"term_{name}_se"] = self.term_se(name)
        d["below_resolution"] = [list(x) for x in self.below_resolution]
        return d


def _tail_prob(values, probs, n, threshold, upper, method, trials, seed, key, threads):
    if method == "exact":
        return exact_tail(values, probs, n, threshold, upper), 0.0, -1
    hits = mc_tail(values, probs, n, threshold, upper, trials, seed, key, threads)
    return hits / trials, _mc.binomial_se(hits, trials), hits


def bound_terms(ch, px, design, k):
    """Static description of every summand: ``(term, t, s, n, threshold, upper,
    log_prefactor, letter-law arguments)``; exact summands carry a fixed value."""
    st = statistics(ch, px)
    M = design.M
    out = []
    if k == 0:
        return out, st
    out.append(("dominating", k, k, design.n[k], design.log_gamma[k], False, 0.0,
                dict(t=k, a=k, b=0, independent=False)))
    for t in range(1, k):
        out.append(("wrong_time", t, t, design.n[t], design.log_gamma[t], True,
                    log(comb(k, t)), dict(t=t, a=t, b=0, independent=False)))
    for t in range(1, k + 1):
        nt = design.n[t]
        for s in range(1, t):
            E = st.cross[(t - s, t, k)]
            thr = nt * E + design.lam[(s, t)] if np.isfinite(E) else -np.inf
            out.append(("confuse_self", t, s, nt, thr, True, log(comb(k, t - s)),
                        dict(t=t, a=t - s, b=0, independent=False)))
        for s in range(1, t + 1):
            E = st.cross[(t - s, t, k)] if s < t else 0.0
            thr = design.log_gamma[t] - nt * E - design.lam[(s, t)] if np.isfinite(E) else np.inf
            lp = log(comb(k, t - s)) + log_comb(M - k, s)
            out.append(("confuse_other", t, s, nt, thr, True, lp,
                        dict(t=t, a=s, b=t - s, independent=True)))
    return out, st


def evaluate_bound(ch, px, design, k, trials=10**5, seed=0, method="mc", threads=None):
    """Evaluate every bound term for ``k`` active users.

    Parameters
    ----------
    method : {'mc', 'exact'}
        Monte Carlo over ``trials`` length-``n`` sums, or exact enumeration of
        count vectors (practical only for tiny ``n`` and alphabets).
    """
    if not 0 <= k <= design.K or k > ch.K:
        raise ValueError(f"k={k} outside the design")
    if method == "mc":
        trials = _mc.check_trials(trials, MIN_TRIALS)
    elif method != "exact":
        raise ValueError(f"unknown method {method!r}")
    rep = ErrorBoundReport(k, method, trials if method == "mc" else 0, int(seed))
    null = output_pmf(ch, px, 0)
    spec = TestSpec(design.zero_test, design.gamma0, null)
    n0 = design.n[0]
    pk = output_pmf(ch, px, k)
    key = (k, _TERM_ID["zero_test"], 0, 0)
    if method == "exact":
        acc, se, hits = exact_acceptance(spec, pk, n0), 0.0, -1
    else:
        from .detect import count_acceptances

        hits = count_acceptances(spec, pk, n0, trials, seed, key, threads)
        acc, se = hits / trials, _mc.binomial_se(hits, trials)
        if k == 0:
            hits = trials - hits
    p_zero = 1 - acc if k == 0 else acc
    rep.components.append(Component("zero_test", 0, 0, n0, design.gamma0, 0.0, p_zero, se, method, hits))
    if k == 0:
        return rep
    rep.components.append(Component("repetition", 0, 0, 0, np.nan, 0.0,
                                    repetition_probability(design.M, k) if k <= design.M else 1.0,
                                    0.0, "exact"))
    terms, _ = bound_terms(ch, px, design, k)
    for name, t, s, n, thr, upper, lp, law in terms:
        if not np.isfinite(lp):
            rep.components.append(Component(name, t, s, n, thr, lp, 0.0, 0.0, "exact"))
            continue
        values, probs = density_pmf(ch, px, k=k, **law)
        if thr == np.inf:
            rep.components.append(Component(name, t, s, n, thr, lp, 0.0, 0.0, "exact"))
            continue
        if thr == -np.inf:
            q = float(probs[np.isfinite(values)].sum())
            rep.components.append(Component(name, t, s, n, thr, lp, q**n, 0.0, "exact"))
            continue
        p, se, hits = _tail_prob(values, probs, n, thr, upper, method, trials, seed,
                                 (k, _TERM_ID[name], t, s), threads)
        rep.components.append(Component(name, t, s, n, thr, lp, p, se, method, hits))
    return rep


def single_user_bound(ch, px, design, trials=10**5, seed=0, threads=None):
    """Direct three-term evaluation for ``k = 1`` (dominating, zero test, M-1 impostors)."""
    M = design.M
    v1, p1 = density_pmf(ch, px, t=1, a=1, b=0, k=1)
    vb, pb = density_pmf(ch, px, t=1, a=1, b=0, k=1, independent=True)
    n1, g1 = design.n[1], design.log_gamma[1]
    key_d = (1, _TERM_ID["dominating"], 1, 1)
    key_o = (1, _TERM_ID["confuse_other"], 1, 1)
    dom = mc_tail(v1, p1, n1, g1, False, trials, seed, key_d, threads) / trials
    oth = mc_tail(vb, pb, n1, g1 - design.lam[(1, 1)], True, trials, seed, key_o, threads) / trials
    spec = TestSpec(design.zero_test, design.gamma0, output_pmf(ch, px, 0))
    from .detect import count_acceptances

    z = count_acceptances(spec, output_pmf(ch, px, 1), design.n[0], trials, seed,
                          (1, _TERM_ID["zero_test"], 0, 0), threads) / trials
    return dom + z + (M - 1) * oth
