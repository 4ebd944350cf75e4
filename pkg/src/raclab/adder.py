"""Closed-form statistics of the adder-erasure RAC under equiprobable inputs.

With ``Z ~ Binom(k, 1/2)`` the sum-rate information is
``I_k = (1 - delta) H(Z)`` and the dispersion is
``V_k = (1 - delta) [V(Z) + delta H(Z)^2]``.  The asymptotic series below
drop the ``O(k^-3)`` and ``O(ln k / k^3)`` remainders.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from math import comb, log

import numpy as np
from scipy.special import gammaln

_EXACT_INT_MAX = 50
_N_MAX = 10**5


@dataclass(frozen=True)
class BinomialStats:
    """Entropy ``H`` (nats) and varentropy ``V`` (nats^2) of ``Binom(n, 1/2)``."""

    n: int
    H: float
    V: float


def binom_log_pmf(n):
    """``log(C(n, j) 2^-n)`` for ``j = 0..n``."""
    if n <= _EXACT_INT_MAX:
        return np.array([log(comb(n, j)) for j in range(n + 1)]) - n * log(2.0)
    j = np.arange(n + 1)
    return gammaln(n + 1) - gammaln(j + 1) - gammaln(n - j + 1) - n * log(2.0)


def binom_stats_exact(n):
    """Entropy and varentropy of ``Binom(n, 1/2)`` by direct summation."""
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= _N_MAX:
        raise ValueError(f"n must be an integer in [1, {_N_MAX}], got {n!r}")
    lp = binom_log_pmf(int(n))
    p = np.exp(lp)
    H = float(-np.sum(p * lp))
    V = float(np.sum(p * (-lp - H) ** 2))
    return BinomialStats(int(n), H, V)


def _check(k, delta):
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta={delta} outside [0, 1]")


def adder_stats(k, delta, mode="exact"):
    """``(I_k, V_k)`` in nats for the adder-erasure RAC with Bernoulli(1/2) inputs.

    Parameters
    ----------
    k : int
        Number of active users.
    delta : float
        Erasure probability.
    mode : {'exact', 'approx'}
        Exact binomial summation or the truncated asymptotic series.
    """
    _check(k, delta)
    if mode == "exact":
        b = binom_stats_exact(k)
        return (1 - delta) * b.H, (1 - delta) * (b.V + delta * b.H**2)
    if mode == "approx":
        L = np.log(np.pi * np.e * k / 2)
        I = (1 - delta) * (0.5 * L - 1 / (12 * k**2))
        V = (1 - delta) * (delta / 4 * L**2 + 0.5 - 1 / (2 * k) - (0.5 + delta * L / 12) / k**2)
        return float(I), float(V)
    raise ValueError(f"unknown mode {mode!r}")


def figure_table(delta, k_max):
    """Rows ``(k, I_exact, I_approx, V_exact, V_approx)`` for ``k = 1..k_max``."""
    if not 1 <= k_max <= 10**4:
        raise ValueError("k_max must lie in [1, 10000]")
    rows = []
    for k in range(1, k_max + 1):
        ie, ve = adder_stats(k, delta, "exact")
        ia, va = adder_stats(k, delta, "approx")
        rows.append((k, ie, ia, ve, va))
    return rows


def emit_figure_data(delta, k_max, path=None):
    """CSV text of :func:`figure_table`; also written to ``path`` if given."""
    from .io import write_csv

    header = ["k", "I_exact", "I_approx", "V_exact", "V_approx"]
    units = ["users", "nats", "nats", "nats^2", "nats^2"]
    return write_csv(path, header, figure_table(delta, k_max), units)


# Stirling-series helpers, used only to check the local binomial approximation.

def stirling_f(x, n):
    u2 = (2 * x - n) ** 2 / n
    return -u2**2 / 12 + u2 / 2 - 0.25


def stirling_g(x, n):
    u2 = (2 * x - n) ** 2 / n
    return u2**4 / 288 - 3 * u2**3 / 40 + 19 * u2**2 / 48 - 11 * u2 / 24 + 1 / 32


def binom_pmf_series(x, n):
    """Second-order Stirling approximation to ``C(n, x) 2^-n``."""
    x = np.asarray(x, dtype=float)
    gauss = np.exp(-((x - n / 2) ** 2) / (n / 2)) / np.sqrt(np.pi * n / 2)
    return gauss * (1 + stirling_f(x, n) / n + stirling_g(x, n) / n**2)


def central_interval(n, A):
    """Integers in ``[n/2 - (A/2) sqrt(n ln n), n/2 + (A/2) sqrt(n ln n)]``."""
    h = A / 2 * np.sqrt(n * np.log(n))
    lo, hi = int(np.ceil(n / 2 - h)), int(np.floor(n / 2 + h))
    return np.arange(max(lo, 0), min(hi, n) + 1)
