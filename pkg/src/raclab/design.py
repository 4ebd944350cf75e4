"""Normal-approximation code design: blocklengths, message sizes, thresholds.

User-facing sizes are in bits (``log2 M``, rates in bits per channel use);
channel statistics arrive in nats and are converted here.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import ceil, log, sqrt

import numpy as np
from scipy.stats import norm

from .channel import InputDistribution, check_assumptions
from .infodensity import statistics

LN2 = log(2.0)


class InfeasibleError(ArithmeticError):
    """The requested operating point cannot be met."""


def q_inv(eps):
    """Inverse of the Gaussian complementary CDF."""
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps={eps} outside (0, 1)")
    return float(norm.isf(eps))


def q_func(x):
    return float(norm.sf(x))


def _to_bits(I, V, units):
    if units == "bits":
        return I, V
    if units == "nats":
        return I / LN2, V / LN2**2
    raise ValueError(f"unknown units {units!r}")


def _budget(I, V, q, n):
    """``n I - q sqrt(n V) - log2(n) / 2`` in bits."""
    return n * I - q * np.sqrt(n * V) - 0.5 * np.log2(n)


def solve_blocklength(I_k, V_k, k, logM_bits, eps_k, units="bits"):
    """Smallest ``n`` with ``k log2 M <= n I - sqrt(n V) Q^-1(eps) - log2(n)/2``.

    The right side decreases and then increases in ``n`` (its derivative in
    ``u = n^-1/2`` is a downward parabola), so below the turning point only
    ``n = 1`` can qualify and above it an integer bisection is exact.
    """
    I, V = _to_bits(I_k, V_k, units)
    if not I > 0:
        raise InfeasibleError(f"I_{k} = {I_k} <= 0: no blocklength achieves log M > 0")
    if V < 0:
        raise ValueError("negative dispersion")
    if logM_bits <= 0:
        raise ValueError("logM_bits must be positive")
    q = q_inv(eps_k)
    target = k * logM_bits
    if _budget(I, V, q, 1) >= target:
        return 1
    a, c = q * sqrt(V) / 2, 1 / (2 * LN2)
    u = (-a + sqrt(a * a + 4 * c * I)) / (2 * c)
    lo = max(1, int(1 / u**2))
    if _budget(I, V, q, lo) >= target:
        return lo
    hi = max(2 * lo, 2)
    while _budget(I, V, q, hi) < target:
        lo, hi = hi, 2 * hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _budget(I, V, q, mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def solve_message_size(I_1, V_1, n_1, eps_1, units="bits"):
    """``log2 M = n I - sqrt(n V) Q^-1(eps) - log2(n)/2``; raises if not positive."""
    if n_1 < 2:
        raise ValueError("n_1 must be at least 2")
    I, V = _to_bits(I_1, V_1, units)
    logM = float(_budget(I, V, q_inv(eps_1), n_1))
    if logM <= 0:
        raise InfeasibleError(f"n_1={n_1} supports no positive message size (got {logM:.4g} bits)")
    return logM


@dataclass
class CodeDesign:
    """Parameters of the rateless single-threshold code.

    ``n``, ``log_gamma``, ``tau`` and ``eps`` are indexed by ``k = 0..K``;
    ``log_gamma[0]`` and ``tau[0]`` are unused.  ``lam`` maps ``(s, t)`` to
    the slack used for every ``k >= t``.
    """

    M: int
    n: tuple
    log_gamma: tuple
    tau: tuple
    lam: dict
    eps: tuple
    zero_test: str
    gamma0: float
    mode: str = "normal"
    extra: dict = field(default_factory=dict)

    @property
    def K(self):
        return len(self.n) - 1

    @property
    def logM_bits(self):
        return log(self.M, 2)

    def lam_for(self, s, t, k=None):
        return self.lam[(s, t)]

    def rates(self):
        """``R_k = log2 M / n_k`` for ``k = 0..K``."""
        return tuple(self.logM_bits / nk for nk in self.n)

    def to_dict(self):
        return {
            "M": self.M,
            "logM_bits": self.logM_bits,
            "n": list(self.n),
            "log_gamma": list(self.log_gamma),
            "tau": list(self.tau),
            "lambda": {f"{s},{t}": v for (s, t), v in sorted(self.lam.items())},
            "epsilon_target": list(self.eps),
            "zero_test": self.zero_test,
            "gamma0": self.gamma0,
            "mode": self.mode,
            **({"extra": self.extra} if self.extra else {}),
        }

    @classmethod
    def from_dict(cls, d):
        lam = {tuple(int(i) for i in key.split(",")): float(v) for key, v in d["lambda"].items()}
        return cls(int(d["M"]), tuple(int(x) for x in d["n"]), tuple(d["log_gamma"]),
                   tuple(d["tau"]), lam, tuple(d["epsilon_target"]), d["zero_test"],
                   float(d["gamma0"]), d.get("mode", "normal"), d.get("extra", {}))


def _per_k(eps, K):
    if np.isscalar(eps):
        return (float(eps),) * (K + 1)
    eps = tuple(float(e) for e in eps)
    if len(eps) != K + 1:
        raise ValueError(f"need {K + 1} error targets eps_0..eps_K, got {len(eps)}")
    return eps


def zero_test_exponent(stats, kind):
    """Worst-case type-II exponent: ``min_k D(P_Y0||P_Yk)`` or ``2 min_k delta_k^2``."""
    if kind == "hoeffding":
        return float(np.min(stats.divergences[1:]))
    if kind == "ks":
        return float(2 * np.min(stats.ks_distances[1:]) ** 2)
    raise ValueError(f"unknown zero test {kind!r}")


def choose_parameters(stats, M, eps, n, mode="normal", zero_test="hoeffding",
                      C=None, n0=None, gamma0=None, n_outputs=None):
    """Thresholds, slacks and the zero-test time for blocklengths ``n_1..n_K``.

    Parameters
    ----------
    stats : ChannelStatistics
    M : int
        Number of messages.
    eps : float or sequence
        Targets ``eps_0..eps_K``.
    n : sequence of int
        Strictly increasing ``n_1..n_K``.
    mode : {'normal', 'berry-esseen'}
        ``tau_k = Q^-1(eps_k)`` or ``Q^-1(eps_k - (B_k + C_k)/sqrt(n_k))``.
    zero_test : {'hoeffding', 'ks'}
    C : sequence, optional
        Slack constants ``C_1..C_K`` for Berry-Esseen mode (default 0).
    n0, gamma0 : optional overrides for the zero-test length and threshold.
    n_outputs : int, optional
        Output alphabet size for the Hoeffding threshold (default: from stats).
    """
    from .detect import thresholds

    K = stats.K
    n = tuple(int(x) for x in n)
    if len(n) != K:
        raise ValueError(f"need blocklengths n_1..n_{K}")
    if any(b <= a for a, b in zip(n, n[1:])) or n[0] < 1:
        raise ValueError("blocklengths must be positive and strictly increasing")
    if M < 1:
        raise ValueError("M must be positive")
    eps = _per_k(eps, K)
    C = (0.0,) * K if C is None else tuple(C)

    tau, log_gamma = [0.0], [0.0]
    for k in range(1, K + 1):
        nk = n[k - 1]
        if mode == "normal":
            t = q_inv(eps[k])
        elif mode == "berry-esseen":
            arg = eps[k] - (stats.B[k] + C[k - 1]) / sqrt(nk)
            if arg <= 0:
                raise InfeasibleError(f"blocklength too small for Berry-Esseen slack at k={k}")
            t = q_inv(arg)
        else:
            raise ValueError(f"unknown mode {mode!r}")
        tau.append(t)
        log_gamma.append(nk * stats.I[k] - t * sqrt(nk * stats.V[k]))

    lam = {}
    for t in range(1, K + 1):
        for s in range(1, t + 1):
            lam[(s, t)] = 0.0 if s == t else n[t - 1] / 2 * (stats.cond_mi[(s, t)] - s / t * stats.I[t])

    if n0 is None:
        expo = zero_test_exponent(stats, zero_test)
        if not expo > 0:
            raise InfeasibleError("outputs with and without users are indistinguishable")
        n0 = max(1, ceil(log(n[0]) / (2 * expo)))
    n0 = int(min(n0, n[0]))
    if gamma0 is None:
        ny = stats.output_pmfs.shape[1] if n_outputs is None else n_outputs
        gamma0 = thresholds(zero_test, n0, eps[0], ny)
    return CodeDesign(int(M), (n0,) + n, tuple(log_gamma), tuple(tau), lam, eps,
                      zero_test, float(gamma0), mode)


def dominant_mask(points):
    """Boolean mask of maximal points; among identical points the first wins."""
    pts = np.asarray(points, dtype=float)
    keep = np.ones(len(pts), dtype=bool)
    for i, p in enumerate(pts):
        ge = np.all(pts >= p, axis=1)
        gt = np.any(pts > p, axis=1)
        same = np.all(pts == p, axis=1)
        if np.any(ge & gt) or np.any(same[:i]):
            keep[i] = False
    return keep


@dataclass
class RateRegion:
    rows: list
    skipped: list

    def dominant(self):
        return [r for r in self.rows if r["dominant"]]


def _region_point(ch, p, logM_bits, eps):
    px = InputDistribution.bernoulli(p)
    rep = check_assumptions(ch, px)
    if not rep.all_hold:
        return None
    st = statistics(ch, px)
    n1 = solve_blocklength(st.I[1], st.V[1], 1, logM_bits, eps[1], units="nats")
    n2 = solve_blocklength(st.I[2], st.V[2], 2, logM_bits, eps[2], units="nats")
    return {"p": float(p), "R1": logM_bits / n1, "R2": logM_bits / n2, "n1": n1, "n2": n2}


def sweep_rate_region(ch, logM_bits, eps, p_grid=None, threads=1):
    """Per-input rate pairs ``(R_1, R_2)`` and their dominant points (``K = 2``)."""
    if ch.K != 2:
        raise ValueError("rate-region sweep needs a K = 2 family")
    if p_grid is None:
        p_grid = np.round(np.arange(1, 200) * 0.005, 10)
    p_grid = [float(p) for p in p_grid]
    if any(not 0 < p < 1 for p in p_grid):
        raise ValueError("grid points must lie in (0, 1)")
    eps = _per_k(eps, 2)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            pts = list(ex.map(lambda p: _region_point(ch, p, logM_bits, eps), p_grid))
    else:
        pts = [_region_point(ch, p, logM_bits, eps) for p in p_grid]
    rows = [r for r in pts if r is not None]
    skipped = [p for p, r in zip(p_grid, pts) if r is None]
    if rows:
        mask = dominant_mask([(r["R1"], r["R2"]) for r in rows])
        for r, d in zip(rows, mask):
            r["dominant"] = bool(d)
    return RateRegion(rows, skipped)


@dataclass(frozen=True)
class RateStats:
    """Minimal ``I``/``V`` container (nats, indexed by ``k = 0..K``)."""

    I: np.ndarray
    V: np.ndarray

    @property
    def K(self):
        return len(self.I) - 1


def adder_rate_stats(delta, K):
    """Closed-form adder-erasure statistics for ``k = 0..K``."""
    from .adder import adder_stats

    IV = [(0.0, 0.0)] + [adder_stats(k, delta, "exact") for k in range(1, K + 1)]
    I, V = zip(*IV)
    return RateStats(np.array(I), np.array(V))


def per_user_rate_curve(stats, n_1, eps, K=None):
    """Rows ``(k, n_k, R_k)`` for the message size fixed by ``n_1``."""
    K = stats.K if K is None else K
    eps = _per_k(eps, K)
    logM = solve_message_size(stats.I[1], stats.V[1], n_1, eps[1], units="nats")
    rows = []
    for k in range(1, K + 1):
        nk = n_1 if k == 1 else solve_blocklength(stats.I[k], stats.V[k], k, logM, eps[k], units="nats")
        rows.append((k, nk, logM / nk))
    return logM, rows


def default_blocklengths(stats, logM_bits, eps):
    """``n_1..n_K`` solving the normal approximation for every ``k``."""
    K = stats.K
    eps = _per_k(eps, K)
    n = [solve_blocklength(stats.I[k], stats.V[k], k, logM_bits, eps[k], units="nats")
         for k in range(1, K + 1)]
    if any(b <= a for a, b in zip(n, n[1:])):
        raise InfeasibleError(f"normal-approximation blocklengths {n} are not increasing")
    return n
