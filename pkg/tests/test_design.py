from math import ceil, log, sqrt

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from raclab import InputDistribution, make_adder_erasure, make_binary_example
from raclab.design import (CodeDesign, InfeasibleError, adder_rate_stats, choose_parameters,
                           default_blocklengths, dominant_mask, per_user_rate_curve, q_func, q_inv,
                           solve_blocklength, solve_message_size, sweep_rate_region)
from raclab.infodensity import statistics

LN2 = log(2.0)


def bisect_qinv(eps):
    """Q^-1 by bisection on the Gaussian tail integral (independent oracle)."""
    mp.mp.dps = 30
    lo, hi = mp.mpf(-10), mp.mpf(10)
    for _ in range(200):
        mid = (lo + hi) / 2
        if mp.erfc(mid / mp.sqrt(2)) / 2 > eps:
            lo = mid
        else:
            hi = mid
    return float(lo)


def brute_blocklength(I, V, k, logM, eps):
    q = bisect_qinv(eps)
    n = 1
    while k * logM > n * I - q * sqrt(n * V) - 0.5 * np.log2(n):
        n += 1
    return n


@pytest.mark.parametrize("eps,val", [(0.5, 0.0), (1e-3, 3.0902), (1e-6, 4.7534)])
def test_q_inv(eps, val):
    assert q_inv(eps) == pytest.approx(val, abs=1e-4)
    assert q_inv(eps) == pytest.approx(bisect_qinv(eps), abs=1e-9)
    assert q_func(q_inv(eps)) == pytest.approx(eps, rel=1e-12)


def test_q_inv_domain():
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            q_inv(bad)


def test_reference_blocklengths():
    ch = make_binary_example(0.11, 0.11)
    st_ = statistics(ch, InputDistribution.bernoulli(0.5))
    n = [solve_blocklength(st_.I[k], st_.V[k], k, 1000, 1e-3, units="nats") for k in (1, 2)]
    assert n == [2290, 4399]
    ch = make_binary_example(0.7, 0.11)
    st_ = statistics(ch, InputDistribution.bernoulli(0.35))
    n = [solve_blocklength(st_.I[k], st_.V[k], k, 1000, 1e-3, units="nats") for k in (1, 2)]
    assert n == [2501, 4904]


@pytest.mark.parametrize("I,V,k,logM,eps", [(0.5, 0.3, 1, 100, 1e-3), (0.8, 0.0, 2, 50, 0.1),
                                            (1.2, 2.0, 3, 20, 1e-6), (0.3, 0.1, 1, 5, 0.7)])
def test_blocklength_matches_linear_scan(I, V, k, logM, eps):
    assert solve_blocklength(I, V, k, logM, eps) == brute_blocklength(I, V, k, logM, eps)


def test_zero_dispersion_limit():
    I, k, logM = 0.7, 2, 40
    n = solve_blocklength(I, 0.0, k, logM, 1e-3)
    assert k * logM <= n * I - 0.5 * np.log2(n)
    assert k * logM > (n - 1) * I - 0.5 * np.log2(n - 1)


def test_message_size_special_cases():
    I, n = 0.6, 300
    assert solve_message_size(I, 0.0, n, 1e-3) == pytest.approx(n * I - 0.5 * np.log2(n))
    assert solve_message_size(I, 0.4, n, 0.5) == pytest.approx(n * I - 0.5 * np.log2(n))
    with pytest.raises(InfeasibleError):
        solve_message_size(0.01, 1.0, 10, 1e-6)
    with pytest.raises(InfeasibleError):
        solve_blocklength(0.0, 0.1, 1, 10, 1e-3)


def test_round_trip_adder():
    st_ = adder_rate_stats(0.2, 1)
    logM = solve_message_size(st_.I[1], st_.V[1], 100, 1e-6, units="nats")
    n = solve_blocklength(st_.I[1], st_.V[1], 1, logM, 1e-6, units="nats")
    assert 100 <= n <= 101


@settings(max_examples=60, deadline=None)
@given(I=st.floats(0.05, 2.0), V=st.floats(0.0, 3.0), n1=st.integers(10, 20000),
       eps=st.floats(1e-8, 0.4))
def test_round_trip_property(I, V, n1, eps):
    try:
        logM = solve_message_size(I, V, n1, eps)
    except InfeasibleError:
        return
    n = solve_blocklength(I, V, 1, logM, eps)
    assert n1 - 1 <= n <= n1 + 1
    # the only way to land below n1 is the non-monotone region near n = 1
    if n < n1:
        assert n == 1 or logM <= I


def test_bits_and_nats_paths_agree():
    I, V = 0.4, 0.3
    a = solve_blocklength(I, V, 2, 500, 1e-3, units="nats")
    b = solve_blocklength(I / LN2, V / LN2**2, 2, 500, 1e-3, units="bits")
    assert a == b
    m1 = solve_message_size(I, V, 800, 1e-3, units="nats")
    m2 = solve_message_size(I / LN2, V / LN2**2, 800, 1e-3)
    assert m1 == pytest.approx(m2, rel=1e-12)


def test_choose_parameters(adder2_stats):
    st_ = adder2_stats
    d = choose_parameters(st_, 16, 1e-3, (40, 90))
    assert d.n[1:] == (40, 90)
    for k in (1, 2):
        nk = d.n[k]
        expect = nk * st_.I[k] - 3.0902 * sqrt(nk * st_.V[k])
        assert d.log_gamma[k] == pytest.approx(expect, abs=1e-3 * sqrt(nk * st_.V[k]))
    assert d.lam[(1, 1)] == 0 and d.lam[(2, 2)] == 0
    assert d.lam[(1, 2)] > 0
    assert 1 <= d.n[0] <= d.n[1]
    assert d.rates()[1] == pytest.approx(4 / 40)
    back = CodeDesign.from_dict(d.to_dict())
    assert back.n == d.n and back.lam == d.lam


def test_choose_parameters_validation(adder2_stats):
    with pytest.raises(ValueError):
        choose_parameters(adder2_stats, 16, 1e-3, (50, 40))
    with pytest.raises(ValueError):
        choose_parameters(adder2_stats, 16, (0.1, 0.1), (40, 90))
    with pytest.raises(InfeasibleError):
        choose_parameters(adder2_stats, 16, 1e-3, (3, 5), mode="berry-esseen")


def test_zero_test_length_rule(adder2_stats):
    d = choose_parameters(adder2_stats, 16, 1e-3, (200, 400))
    D = min(adder2_stats.divergences[1:])
    assert d.n[0] == ceil(log(200) / (2 * D))


def test_dominant_mask():
    pts = [(1, 1), (2, 0.5), (0.5, 2), (0.9, 0.9), (2, 0.5)]
    assert list(dominant_mask(pts)) == [True, True, True, False, False]


@settings(max_examples=40, deadline=None)
@given(pts=st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=20))
def test_dominant_set_stable_under_dominated_points(pts):
    mask = dominant_mask(pts)
    dom = [p for p, m in zip(pts, mask) if m]
    extra = [(x * 0.5, y * 0.5) for x, y in dom]
    mask2 = dominant_mask(pts + extra)
    dom2 = [p for p, m in zip(pts + extra, mask2) if m]
    assert sorted(set(dom2)) == sorted(set(dom))


def test_rate_region_symmetric_channel():
    ch = make_binary_example(0.11, 0.11)
    reg = sweep_rate_region(ch, 1000, 1e-3, [0.3, 0.5, 0.7])
    rows = {r["p"]: r for r in reg.rows}
    assert rows[0.3]["n1"] == rows[0.7]["n1"] and rows[0.3]["n2"] == rows[0.7]["n2"]
    assert [r["p"] for r in reg.dominant()] == [0.5]
    assert rows[0.5]["R1"] == pytest.approx(0.437, abs=5e-4)
    assert rows[0.5]["R2"] == pytest.approx(0.227, abs=5e-4)


def test_rate_curve_adder():
    st_ = adder_rate_stats(0.2, 30)
    curves = {}
    for n1 in (20, 100, 500, 2500):
        logM, rows = per_user_rate_curve(st_, n1, 1e-6)
        R = np.array([r[2] for r in rows])
        assert rows[0][1] == n1 and R[0] == pytest.approx(logM / n1)
        assert np.all(np.diff(R) <= 0)
        cap = st_.I[1:] / LN2 / np.arange(1, 31)
        assert np.all(cap - R > 0)
        curves[n1] = cap - R
    for a, b in zip((20, 100, 500), (100, 500, 2500)):
        assert np.all(curves[b] < curves[a])


def test_default_blocklengths_increase(adder2_stats):
    n = default_blocklengths(adder2_stats, 4, (0.05, 0.1, 0.1))
    assert n[0] < n[1]
