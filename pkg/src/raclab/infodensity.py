"""Exact information densities and their moments by enumeration.

All quantities are in nats.  Densities are extended reals: ``-inf`` marks an
output that the hypothesised inputs cannot produce.  Expectations skip
zero-probability atoms (``0 * -inf = 0``) and are ``-inf`` whenever a
``-inf`` atom carries positive probability.

Throughout, users are exchangeable, so a density on the ``t``-user channel
only depends on *how many* inputs sit in the numerator set ``A`` and the
conditioning set ``B``.  Tables are laid out as ``[x_A..., x_B..., y]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelError, InputDistribution, product_weights

_MERGE_DECIMALS = 12


def _pmf(px):
    return px.pmf if isinstance(px, InputDistribution) else np.asarray(px, dtype=float)


def conditional_output(ch, px, k, m):
    """``P_{Y_k | X_[m]}`` as an array of shape ``(|X|,)*m + (|Y|,)``.

    The remaining ``k - m`` inputs are averaged out under ``px``.
    """
    if not 0 <= m <= k <= ch.K:
        raise ChannelError(f"need 0 <= m <= k <= K, got m={m}, k={k}")
    p = _pmf(px)
    T = ch.tensor(k)
    for _ in range(k - m):
        T = np.tensordot(T, p, axes=([m], [0]))
    return T


def output_pmf(ch, px, k):
    """``P_{Y_k}`` over the global output alphabet."""
    return conditional_output(ch, px, k, 0)


def joint_weights(ch, px, k, m):
    """``P(x_[m], y)`` when ``k`` users are active, shape ``(|X|,)*m + (|Y|,)``."""
    p = _pmf(px)
    return product_weights(p, m)[..., None] * conditional_output(ch, px, k, m)


def density_table(ch, px, t, a, b):
    """``i_t(x_A; y | x_B)`` for ``|A| = a``, ``|B| = b`` on the ``t``-user channel.

    Returns an array of shape ``(|X|,)*(a+b) + (|Y|,)`` indexed as
    ``[x_A..., x_B..., y]``.
    """
    if a < 0 or b < 0 or a + b > t:
        raise ChannelError(f"need a + b <= t, got a={a}, b={b}, t={t}")
    nx, ny = ch.n_inputs, ch.n_outputs
    shape = (nx,) * (a + b) + (ny,)
    if a == 0:
        return np.zeros(shape)
    num = conditional_output(ch, px, t, a + b)
    den = conditional_output(ch, px, t, b).reshape((1,) * a + (nx,) * b + (ny,))
    den = np.broadcast_to(den, shape)
    out = np.zeros(shape)
    both = (num > 0) & (den > 0)
    out[both] = np.log(num[both]) - np.log(den[both])
    out[(num == 0) & (den > 0)] = -np.inf
    # only reachable on zero-weight inputs
    out[(num > 0) & (den == 0)] = np.inf
    out[..., ~ch.in_output_set(t)] = 0.0
    return out


def density(ch, px, t, A, B, x_A, x_B, y):
    """Single-letter ``i_t(x_A; y | x_B)``.

    Parameters
    ----------
    A, B : sequence of int
        Disjoint user positions in ``range(t)``.
    x_A, x_B : sequence of int
        Input symbol indices for those users.
    y : int
        Output index in the global alphabet.
    """
    A, B = list(A), list(B)
    if set(A) & set(B):
        raise ChannelError("A and B must be disjoint")
    if any(not 0 <= i < t for i in A + B):
        raise ChannelError(f"user positions must lie in range({t})")
    if len(x_A) != len(A) or len(x_B) != len(B):
        raise ChannelError("symbol vectors must match A and B")
    for x in list(x_A) + list(x_B):
        if not 0 <= x < ch.n_inputs:
            raise ChannelError(f"input symbol {x} out of alphabet")
    if not 0 <= y < ch.n_outputs:
        raise ChannelError(f"output symbol {y} out of alphabet")
    table = density_table(ch, px, t, len(A), len(B))
    return float(table[tuple(x_A) + tuple(x_B) + (y,)])


def density_weights(ch, px, k, a, b, independent=False):
    """Joint law of the table arguments ``[x_A..., x_B..., y]`` under ``k`` users.

    With ``independent=False`` both ``x_A`` and ``x_B`` are inputs of active
    users.  With ``independent=True`` ``x_A`` is an independent copy drawn
    from ``px`` (an untransmitted codeword).
    """
    if not independent:
        return joint_weights(ch, px, k, a + b)
    p = _pmf(px)
    wa = product_weights(p, a)
    wb = joint_weights(ch, px, k, b)
    return np.multiply.outer(wa, wb)


def expectation(table, weights):
    """``E[table]`` under ``weights`` with the ``0 * -inf = 0`` convention."""
    mask = weights > 0
    vals = table[mask]
    if np.any(vals == -np.inf):
        return -np.inf
    return float(np.sum(weights[mask] * vals))


def density_pmf(ch, px, t, a, b, k, independent=False):
    """Distribution of the single-letter density ``i_t(x_A; Y_k | x_B)``.

    Returns
    -------
    values, probs : ndarray
        Sorted distinct density values (``-inf`` allowed) and their masses.
        Values equal to 12 decimals are merged.
    """
    table = density_table(ch, px, t, a, b)
    w = density_weights(ch, px, k, a, b, independent)
    mask = w > 0
    vals, probs = table[mask], w[mask]
    keys = np.where(np.isfinite(vals), np.round(vals, _MERGE_DECIMALS), vals)
    uniq, inv = np.unique(keys, return_inverse=True)
    masses = np.bincount(inv, weights=probs, minlength=uniq.size)
    reps = np.empty(uniq.size)
    reps[inv] = vals
    return reps, masses


def kl_divergence(p, q):
    """``D(p || q)`` in nats; ``inf`` if ``p`` is not absolutely continuous."""
    p, q = np.asarray(p, float), np.asarray(q, float)
    m = p > 0
    if np.any(q[m] == 0):
        return np.inf
    return float(np.sum(p[m] * (np.log(p[m]) - np.log(q[m]))))


def ks_distance(p, q):
    """``sup_x |F_p(x) - F_q(x)|`` for pmfs on a common ordered alphabet."""
    return float(np.max(np.abs(np.cumsum(p) - np.cumsum(q))))


@dataclass
class ChannelStatistics:
    """Exact per-``k`` statistics of a family under an input distribution.

    Arrays ``I``, ``V``, ``T``, ``B`` are indexed by ``k = 0..K`` (entry 0 is
    zero).  Dictionaries are keyed by user counts:

    * ``mi[(s, k)]``        ``I_k(X_[s]; Y_k)``
    * ``cond_mi[(s, k)]``   ``I_k(X_[s]; Y_k | X_[s+1:k])``
    * ``increments[(i, k)]`` ``I_k(X_i; Y_k | X_[i-1])``
    * ``cross[(s, t, k)]``  ``E[i_t(X_[s]; Y_k)]`` for ``s <= t <= k``
    """

    K: int
    I: np.ndarray
    V: np.ndarray
    T: np.ndarray
    B: np.ndarray
    mi: dict = field(default_factory=dict)
    cond_mi: dict = field(default_factory=dict)
    increments: dict = field(default_factory=dict)
    cross: dict = field(default_factory=dict)
    output_pmfs: np.ndarray = None
    divergences: np.ndarray = None
    ks_distances: np.ndarray = None

    def to_dict(self):
        def key(k):
            return ",".join(str(i) for i in k)

        return {
            "K": self.K,
            "I": self.I[1:].tolist(),
            "V": self.V[1:].tolist(),
            "T": self.T[1:].tolist(),
            "B": [float(b) for b in self.B[1:]],
            "mutual_information": {key(k): v for k, v in sorted(self.mi.items())},
            "conditional_mutual_information": {key(k): v for k, v in sorted(self.cond_mi.items())},
            "cross_expectation": {key(k): _json_real(v) for k, v in sorted(self.cross.items())},
            "output_pmfs": self.output_pmfs.tolist(),
            "divergence_from_silence": self.divergences[1:].tolist(),
            "ks_from_silence": self.ks_distances[1:].tolist(),
        }


def _json_real(v):
    return v if np.isfinite(v) else ("-inf" if v < 0 else "inf")


def statistics(ch, px):
    """Compute :class:`ChannelStatistics` by exact summation."""
    K = ch.K
    I, V, T, B = (np.zeros(K + 1) for _ in range(4))
    mi, cond_mi, incr, cross = {}, {}, {}, {}
    for k in range(1, K + 1):
        table = density_table(ch, px, k, k, 0)
        w = joint_weights(ch, px, k, k)
        mask = w > 0
        vals, probs = table[mask], w[mask]
        if np.any(~np.isfinite(vals)):
            raise ChannelError(f"I_{k} density takes infinite values with positive mass")
        I[k] = np.sum(probs * vals)
        dev = np.abs(vals - I[k])
        V[k] = np.sum(probs * dev**2)
        T[k] = np.sum(probs * dev**3)
        B[k] = 6.0 * T[k] / V[k] ** 1.5 if V[k] > 0 else np.inf
        for s in range(1, k + 1):
            mi[(s, k)] = expectation(density_table(ch, px, k, s, 0), joint_weights(ch, px, k, s))
            cond_mi[(s, k)] = expectation(density_table(ch, px, k, s, k - s), w)
            incr[(s, k)] = expectation(density_table(ch, px, k, 1, s - 1),
                                       joint_weights(ch, px, k, s))
            for t in range(s, k + 1):
                cross[(s, t, k)] = expectation(density_table(ch, px, t, s, 0),
                                               joint_weights(ch, px, k, s))
    pmfs = np.array([output_pmf(ch, px, k) for k in range(K + 1)])
    div = np.array([0.0] + [kl_divergence(pmfs[0], pmfs[k]) for k in range(1, K + 1)])
    ks = np.array([0.0] + [ks_distance(pmfs[k], pmfs[0]) for k in range(1, K + 1)])
    return ChannelStatistics(K, I, V, T, B, mi, cond_mi, incr, cross, pmfs, div, ks)


@dataclass
class OrderingCheck:
    lemma: int
    label: str
    lhs: float
    rhs: float
    strict: bool
    margin: float
    passed: bool


@dataclass
class LemmaReport:
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def by_lemma(self):
        out = {}
        for c in self.checks:
            out[c.lemma] = out.get(c.lemma, True) and c.passed
        return out

    def min_margin(self, lemma=None):
        ms = [c.margin for c in self.checks if c.strict and (lemma is None or c.lemma == lemma)]
        return min(ms) if ms else np.inf


def verify_orderings(ch, px, margin=1e-9, stats=None):
    """Check the ordering lemmas on exact statistics.

    Strict inequalities must hold with ``rhs - lhs > margin``; the weak part of
    the cross-expectation ordering is checked with ``rhs - lhs >= -margin``.
    Failures are reported, never raised.
    """
    st = statistics(ch, px) if stats is None else stats
    K = st.K
    checks = []

    def add(lemma, label, lhs, rhs, strict=True):
        gap = rhs - lhs if np.isfinite(lhs) else np.inf
        ok = gap > margin if strict else gap >= -margin
        checks.append(OrderingCheck(lemma, label, float(lhs), float(rhs), strict, float(gap), bool(ok)))

    for k in range(2, K + 1):
        for s in range(1, k):
            add(1, f"I_{k}/{k} < I_{s}/{s}", st.I[k] / k, st.I[s] / s)
            add(2, f"I_{k}/{k} < I_{k}(X_[{s}];Y|rest)/{s}", st.I[k] / k, st.cond_mi[(s, k)] / s)
            for t in range(s, k):
                add(3, f"E[i_{t}(X_[{s}];Y_{k})] <= I_{k}(X_[{s}];Y_{k})",
                    st.cross[(s, t, k)], st.mi[(s, k)], strict=False)
                add(3, f"I_{k}(X_[{s}];Y_{k}) < I_{t}(X_[{s}];Y_{t})", st.mi[(s, k)], st.mi[(s, t)])
        for i in range(1, k):
            add(4, f"I_{k}(X_{i};Y|X_[{i - 1}]) < I_{k}(X_{i + 1};Y|X_[{i}])",
                st.increments[(i, k)], st.increments[(i + 1, k)])
    return LemmaReport(checks)


def conditional_dependence(ch, px, k, s, t):
    """``I(X_[s]; X_[s+1:t] | Y_k)`` in nats under ``k`` active users."""
    nx = ch.n_inputs
    w = joint_weights(ch, px, k, t)
    py = w.reshape(-1, w.shape[-1]).sum(axis=0)
    wa = w.sum(axis=tuple(range(s, t)))
    wb = w.sum(axis=tuple(range(s)))
    wa_b = wa.reshape((nx,) * s + (1,) * (t - s) + (-1,))
    wb_b = wb.reshape((1,) * s + (nx,) * (t - s) + (-1,))
    m = w > 0
    num = w * py
    den = wa_b * wb_b
    return float(np.sum(w[m] * (np.log(num[m]) - np.log(np.broadcast_to(den, w.shape)[m]))))
