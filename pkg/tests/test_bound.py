from math import comb, exp, log, sqrt

import numpy as np
import pytest

from raclab import InputDistribution, make_adder_erasure
from raclab.bound import (TERMS, bound_terms, evaluate_bound, exact_tail, mc_tail,
                          repetition_probability, single_user_bound)
from raclab.design import choose_parameters, q_func
from raclab.infodensity import density_pmf, statistics

from oracles import convolve_tail


@pytest.fixture(scope="module")
def small(adder2, half, adder2_stats):
    d = choose_parameters(adder2_stats, 4, 0.2, (3, 6), n0=2, gamma0=0.3)
    return adder2, half, d


def test_repetition_probability():
    assert repetition_probability(7, 1) == 0.0
    assert repetition_probability(4, 2) == pytest.approx(0.25)
    M, k = 2**10, 2
    assert abs(repetition_probability(M, k) - k * (k - 1) / (2 * M)) <= (k * k / M) ** 2
    prod = 1.0
    for i in range(5):
        prod *= (1000 - i) / 1000
    assert repetition_probability(1000, 5) == pytest.approx(1 - prod, rel=1e-12)
    with pytest.raises(ValueError):
        repetition_probability(3, 4)


def test_single_user_has_no_cross_time_terms(adder2, half, adder2_stats):
    d = choose_parameters(adder2_stats, 8, 0.1, (30, 60))
    rep = evaluate_bound(adder2, half, d, 1, trials=10**4, seed=0)
    assert rep.term("wrong_time") == 0.0
    assert rep.term("confuse_self") == 0.0
    assert rep.term("repetition") == 0.0


def test_two_user_prefactors(adder2, half, adder2_stats):
    M = 10
    d = choose_parameters(adder2_stats, M, 0.1, (30, 60))
    terms, _ = bound_terms(adder2, half, d, 2)
    by = {(name, t, s): (thr, lp) for name, t, s, n, thr, up, lp, law in terms}
    thr, lp = by[("confuse_other", 2, 2)]
    assert exp(lp) == pytest.approx(comb(M - 2, 2))
    assert thr == pytest.approx(d.log_gamma[2])
    _, lp = by[("confuse_other", 1, 1)]
    assert exp(lp) == pytest.approx(M - 2)
    _, lp = by[("wrong_time", 1, 1)]
    assert exp(lp) == pytest.approx(2)


def test_dominating_term_near_normal_target(adder2, half, adder2_stats):
    st_ = adder2_stats
    n1, eps = 2000, 0.1
    d = choose_parameters(st_, 16, eps, (n1, 4000))
    rep = evaluate_bound(adder2, half, d, 1, trials=10**5, seed=4)
    dom = rep.term("dominating")
    # normal approximation error is at most the Berry-Esseen slack
    assert abs(dom - q_func(d.tau[1])) <= st_.B[1] / sqrt(n1) + 3 * rep.term_se("dominating")


def test_change_of_measure_identity(adder2, half, adder2_stats):
    """P[i(Xbar;Y) > c] = E[exp(-i(X;Y)) 1{i(X;Y) > c}] <= exp(-c)."""
    n = 40
    d = choose_parameters(adder2_stats, 6, 0.1, (20, n))
    c = d.log_gamma[2]
    v, p = density_pmf(adder2, half, 2, 2, 0, 2)
    vb, pb = density_pmf(adder2, half, 2, 2, 0, 2, independent=True)
    direct = exact_tail(vb, pb, n, c, True)
    rng = np.random.default_rng(9)
    counts = rng.multinomial(n, p, size=200_000)
    s = counts @ np.where(np.isfinite(v), v, 0.0)
    tilted = np.where(s > c, np.exp(-s), 0.0)
    assert direct <= exp(-c)
    assert tilted.mean() == pytest.approx(direct, abs=4 * tilted.std() / sqrt(len(tilted)))
    rep = evaluate_bound(adder2, half, d, 2, trials=10**5, seed=1)
    comp = [c_ for c_ in rep.components if (c_.term, c_.t, c_.s) == ("confuse_other", 2, 2)][0]
    assert comp.probability <= exp(-c) + 3 * comp.se


def test_threshold_ladder_monotone(adder2, half, adder2_stats):
    base = choose_parameters(adder2_stats, 8, 0.1, (25, 50), n0=5)
    out = []
    for shift in (-1.0, 0.0, 1.0):
        d = choose_parameters(adder2_stats, 8, 0.1, (25, 50), n0=5)
        d.log_gamma = tuple(g + shift if i else g for i, g in enumerate(base.log_gamma))
        out.append(evaluate_bound(adder2, half, d, 2, method="exact"))
    dom = [r.term("dominating") for r in out]
    conf = [r.term("confuse_other") for r in out]
    wrong = [r.term("wrong_time") for r in out]
    assert dom[0] <= dom[1] <= dom[2] and dom[0] < dom[2]
    assert conf[0] >= conf[1] >= conf[2] and conf[0] > conf[2]
    assert wrong[0] >= wrong[1] >= wrong[2]


def test_general_and_hand_coded_single_user_agree(adder2, half, adder2_stats):
    d = choose_parameters(adder2_stats, 2, 0.1, (30, 60), n0=6)
    rep = evaluate_bound(adder2, half, d, 1, trials=10**5, seed=5)
    hand = single_user_bound(adder2, half, d, trials=10**5, seed=5)
    assert hand == pytest.approx(rep.raw_total, abs=1e-12)
    hand2 = single_user_bound(adder2, half, d, trials=10**5, seed=6)
    assert abs(hand2 - rep.raw_total) <= 4 * rep.total_se * sqrt(2)


@pytest.mark.parametrize("k", [1, 2])
def test_mc_terms_match_convolution_oracle(small, k):
    ch, px, d = small
    rep = evaluate_bound(ch, px, d, k, trials=2 * 10**5, seed=2)
    terms, _ = bound_terms(ch, px, d, k)
    laws = {(name, t, s): (n, thr, up, law) for name, t, s, n, thr, up, lp, law in terms}
    for c in rep.components:
        if c.method != "mc" or c.term == "zero_test":
            continue
        n, thr, up, law = laws[(c.term, c.t, c.s)]
        v, p = density_pmf(ch, px, k=k, **law)
        exact = convolve_tail(v, p, n, thr, up)
        se = sqrt(max(exact * (1 - exact), 1e-300) / rep.trials)
        assert abs(c.probability - exact) <= 4 * se + 1e-12, (c.term, c.t, c.s)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_exact_method_matches_convolution(small, k):
    ch, px, d = small
    rep = evaluate_bound(ch, px, d, k, method="exact")
    terms, _ = bound_terms(ch, px, d, k)
    laws = {(name, t, s): (n, thr, up, law) for name, t, s, n, thr, up, lp, law in terms}
    for c in rep.components:
        if (c.term, c.t, c.s) in laws and c.method == "exact" and np.isfinite(c.threshold):
            n, thr, up, law = laws[(c.term, c.t, c.s)]
            v, p = density_pmf(ch, px, k=k, **law)
            assert c.probability == pytest.approx(convolve_tail(v, p, n, thr, up), abs=1e-12)


def test_impossible_cross_expectation_uses_exact_power():
    ch = make_adder_erasure(3, 0.0)
    px = InputDistribution.bernoulli(0.5)
    st_ = statistics(ch, px)
    # two-user density of one user's input, evaluated on a three-user output
    assert st_.cross[(1, 2, 3)] == -np.inf
    d = choose_parameters(st_, 4, 0.2, (2, 3, 4), n0=2, gamma0=0.3)
    rep = evaluate_bound(ch, px, d, 3, method="exact")
    c = [c for c in rep.components if (c.term, c.t, c.s) == ("confuse_self", 2, 1)][0]
    v, p = density_pmf(ch, px, 2, 1, 0, 3)
    q = p[np.isfinite(v)].sum()
    assert 0 < q < 1
    assert c.probability == pytest.approx(q ** 3)
    other = [c for c in rep.components if (c.term, c.t, c.s) == ("confuse_other", 2, 1)][0]
    assert other.value == 0.0


def test_total_clamped_and_raw_kept(adder2, half, adder2_stats):
    d = choose_parameters(adder2_stats, 64, 0.4, (3, 6), n0=2, gamma0=0.3)
    rep = evaluate_bound(adder2, half, d, 2, method="exact")
    assert rep.raw_total > 1 and rep.total == 1.0
    assert all(0 <= v <= 1 for k_, v in rep.to_dict().items() if k_.startswith("term_")
               and not k_.endswith("_se"))


def test_reproducible_and_thread_independent(adder2, half, adder2_stats):
    d = choose_parameters(adder2_stats, 8, 0.1, (25, 50), n0=5)
    a = evaluate_bound(adder2, half, d, 2, trials=3 * 10**4, seed=7, threads=1).to_dict()
    b = evaluate_bound(adder2, half, d, 2, trials=3 * 10**4, seed=7, threads=3).to_dict()
    assert a == b


def test_standard_error_scaling(adder2, half, adder2_stats):
    d = choose_parameters(adder2_stats, 8, 0.3, (25, 50), n0=5)
    se = [evaluate_bound(adder2, half, d, 1, trials=t, seed=3).term_se("dominating")
          for t in (40_000, 80_000)]
    assert se[1] / se[0] == pytest.approx(1 / sqrt(2), rel=0.1)


def test_mc_tail_counts(rng):
    v, p = np.array([0.0, 1.0]), np.array([0.5, 0.5])
    hits = mc_tail(v, p, 10, 4.5, True, 10**4, 0, (0,))
    assert hits / 10**4 == pytest.approx(convolve_tail(v, p, 10, 4.5, True), abs=0.02)


def test_input_validation(small):
    ch, px, d = small
    with pytest.raises(ValueError):
        evaluate_bound(ch, px, d, 3)
    with pytest.raises(ValueError):
        evaluate_bound(ch, px, d, 1, trials=100)
    with pytest.raises(ValueError):
        evaluate_bound(ch, px, d, 1, method="quad")
    assert set(TERMS) >= {c.term for c in evaluate_bound(ch, px, d, 2, method="exact").components}
