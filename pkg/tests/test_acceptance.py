"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""
import json
import time
from math import exp, log, sqrt

import numpy as np
import pytest
from scipy.stats import norm

from raclab import InputDistribution, make_adder_erasure, make_binary_example
from raclab.adder import adder_stats
from raclab.bound import bound_terms, evaluate_bound
from raclab.cli import run
from raclab.design import (InfeasibleError, choose_parameters, solve_blocklength,
                           solve_message_size, sweep_rate_region)
from raclab.detect import (TestSpec, estimate_test_errors, exact_acceptance, log_exact_acceptance,
                           minimax_quantile, thresholds)
from raclab.infodensity import density_pmf, kl_divergence, output_pmf, statistics, verify_orderings
from raclab.sim import estimate_error_rates

from oracles import convolve_tail

LN2 = log(2.0)


def test_rate_region_symmetric_example(report):
    t0 = time.perf_counter()
    ch = make_binary_example(0.11, 0.11)
    st = statistics(ch, InputDistribution.bernoulli(0.5))
    n = tuple(solve_blocklength(st.I[k], st.V[k], k, 1000, 1e-3, units="nats") for k in (1, 2))
    rates = tuple(round(1000 / nk, 3) for nk in n)
    dt = time.perf_counter() - t0
    ok = n == (2290, 4399) and rates == (0.437, 0.227) and dt < 1
    report(1, "rate region a=b=0.11", ok, f"(n1,n2)={n}, rates={rates}, {dt:.2f}s")
    assert ok


def test_rate_region_asymmetric_example(report):
    t0 = time.perf_counter()
    ch = make_binary_example(0.7, 0.11)
    st = statistics(ch, InputDistribution.bernoulli(0.35))
    n = tuple(solve_blocklength(st.I[k], st.V[k], k, 1000, 1e-3, units="nats") for k in (1, 2))
    reg = sweep_rate_region(ch, 1000, 1e-3)
    dom = [(round(r["R1"], 3), round(r["R2"], 3), r["p"]) for r in reg.dominant()]
    hit = [d for d in dom if d[:2] == (0.400, 0.204)]
    dt = time.perf_counter() - t0
    ok = n == (2501, 4904) and bool(hit) and hit[0][2] == 0.35 and dt < 5
    report(2, "rate region a=0.7 b=0.11", ok,
           f"(n1,n2)={n}, dominant hit={hit}, {len(dom)} dominant points, {dt:.2f}s")
    assert ok


def test_adder_statistics(report):
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(10, 101):
        I, V = adder_stats(k, 0.2)
        Ia, Va = adder_stats(k, 0.2, "approx")
        worst = max(worst, abs(Ia - I) / I, abs(Va - V) / V)
    st = statistics(make_adder_erasure(8, 0.2), InputDistribution.bernoulli(0.5))
    gap = max(max(abs(adder_stats(k, 0.2)[0] - st.I[k]), abs(adder_stats(k, 0.2)[1] - st.V[k]))
              for k in range(1, 9))
    dt = time.perf_counter() - t0
    ok = worst <= 5e-3 and gap <= 1e-9 and dt < 10
    report(3, "adder-erasure I_k, V_k", ok,
           f"max series rel err {worst:.2e} (<=5e-3), max enum gap {gap:.1e} (<=1e-9), {dt:.2f}s")
    assert ok


def test_ordering_lemmas(report):
    t0 = time.perf_counter()
    margins = []
    half = InputDistribution.bernoulli(0.5)
    for delta in (0.0, 0.2, 0.5):
        rep = verify_orderings(make_adder_erasure(3, delta), half)
        margins.append(rep.min_margin() if rep.passed else -np.inf)
    grid = np.round(np.arange(0.05, 0.951, 0.05), 10)
    for a, b in ((0.7, 0.11), (0.11, 0.11)):
        ch = make_binary_example(a, b)
        for p in grid:
            rep = verify_orderings(ch, InputDistribution.bernoulli(p))
            margins.append(rep.min_margin() if rep.passed else -np.inf)
    dt = time.perf_counter() - t0
    ok = min(margins) > 1e-9 and dt < 30
    report(4, "ordering lemmas", ok,
           f"{len(margins)} channel/input pairs, min strict margin {min(margins):.3g} nats, {dt:.2f}s")
    assert ok


def test_bound_vs_simulation(report):
    t0 = time.perf_counter()
    ch = make_adder_erasure(2, 0.2)
    px = InputDistribution.bernoulli(0.5)
    st = statistics(ch, px)
    d = choose_parameters(st, 16, (0.05, 0.1, 0.1), (20, 120), n0=12, gamma0=0.2)
    lines, ok = [], True
    for k in (0, 1, 2):
        b = evaluate_bound(ch, px, d, k, trials=10**5, seed=21)
        s = estimate_error_rates(ch, px, d, k, 5000, seed=22)
        se = sqrt(s.se**2 + b.total_se**2)
        good = 0.02 <= b.total <= 0.2 and s.eps_hat <= b.total + 3 * se
        ok &= good
        lines.append(f"k={k}: eps_hat={s.eps_hat:.4f} bound={b.total:.4f} (3SE={3 * se:.4f})")
    dt = time.perf_counter() - t0
    ok &= dt < 300
    report(5, "bound vs simulation", ok, "; ".join(lines) + f", {dt:.1f}s")
    assert ok


def test_exact_oracle_equivalence(report):
    t0 = time.perf_counter()
    cases = []
    half = InputDistribution.bernoulli(0.5)
    ch = make_adder_erasure(2, 0.2)
    cases.append((ch, half, choose_parameters(statistics(ch, half), 4, 0.2, (3, 6), n0=2,
                                              gamma0=0.3)))
    ch = make_binary_example(0.7, 0.11)
    px = InputDistribution.bernoulli(0.35)
    cases.append((ch, px, choose_parameters(statistics(ch, px), 3, 0.3, (4, 6), n0=3,
                                            gamma0=0.2, zero_test="ks")))
    worst, count = 0.0, 0
    for ch, px, d in cases:
        spec = TestSpec(d.zero_test, d.gamma0, output_pmf(ch, px, 0))
        for k in range(ch.K + 1):
            rep = evaluate_bound(ch, px, d, k, trials=2 * 10**5, seed=31)
            terms, _ = bound_terms(ch, px, d, k)
            laws = {(nm, t, s): (n, thr, up, law) for nm, t, s, n, thr, up, lp, law in terms}
            for c in rep.components:
                if c.method != "mc":
                    continue
                if c.term == "zero_test":
                    acc = exact_acceptance(spec, output_pmf(ch, px, k), d.n[0])
                    exact = 1 - acc if k == 0 else acc
                else:
                    n, thr, up, law = laws[(c.term, c.t, c.s)]
                    v, p = density_pmf(ch, px, k=k, **law)
                    exact = convolve_tail(v, p, n, thr, up)
                se = sqrt(max(exact * (1 - exact), 1e-300) / rep.trials)
                z = abs(c.probability - exact) / se if se > 1e-150 else (0.0 if c.probability == exact else np.inf)
                worst = max(worst, z)
                count += 1
    dt = time.perf_counter() - t0
    ok = worst <= 4 and count > 0 and dt < 60
    report(6, "MC vs exact bound terms", ok,
           f"{count} MC terms, worst deviation {worst:.2f} SE (<=4), {dt:.1f}s")
    assert ok


def test_zero_transmitter_tests(report):
    t0 = time.perf_counter()
    ch = make_adder_erasure(2, 0.2)
    px = InputDistribution.bernoulli(0.5)
    parts, ok = [], True
    for n0 in (50, 200, 800):
        g = thresholds("ks", n0, 0.05)
        err = estimate_test_errors(ch, px, "ks", n0, g, 10**5, seed=n0)
        lim = 2 * exp(-2 * n0 * g * g) + 4 * err.alpha_se
        ok &= err.alpha <= lim
        parts.append(f"KS n0={n0} alpha={err.alpha:.4f}<= {lim:.4f}")
    pm = [output_pmf(ch, px, k) for k in range(3)]
    ns = np.array([200, 400, 800])
    for k in (1, 2):
        D = kl_divergence(pm[0], pm[k])
        lb = []
        for n in ns:
            spec = TestSpec("hoeffding", thresholds("hoeffding", n, 0.05, ch.n_outputs), pm[0])
            lb.append(-log_exact_acceptance(spec, pm[k], int(n)))
        slope = np.polyfit(ns, lb, 1)[0]
        rel = abs(slope - D) / D
        ok &= rel <= 0.2
        parts.append(f"Hoeffding k={k} slope {slope:.4f} vs D {D:.4f} (rel {rel:.3f})")
    null, alt = pm[0], pm[1]
    res = minimax_quantile(null, [alt], 0.05)
    sup = null > 0
    llr = np.log(null[sup] / alt[sup])
    sigma = sqrt(null[sup] @ llr**2 - (null[sup] @ llr) ** 2)
    gap = abs(res.b - sigma * norm.isf(0.05))
    ok &= len(res.I_min) == 1 and gap <= 1e-3
    parts.append(f"minimax |b - sigma Q^-1| = {gap:.1e}")
    dt = time.perf_counter() - t0
    ok &= dt < 300
    report(7, "zero-transmitter tests", ok, "; ".join(parts) + f", {dt:.1f}s")
    assert ok


def test_round_trip_and_determinism(report, tmp_path):
    rng = np.random.default_rng(2024)
    trips, bad = 0, []
    while trips < 20:
        I, V = rng.uniform(0.05, 1.5), rng.uniform(0.0, 2.0)
        n1, eps = int(rng.integers(20, 5000)), float(10 ** rng.uniform(-6, -1))
        try:
            logM = solve_message_size(I, V, n1, eps)
        except InfeasibleError:
            continue
        n = solve_blocklength(I, V, 1, logM, eps)
        trips += 1
        if not n1 <= n <= n1 + 1:
            bad.append((I, V, n1, eps, n))
    same = []
    cmds = [
        (["simulate", "--channel", "adder", "--delta", "0.2", "--K", "2", "--M", "16",
          "--eps", "0.05,0.1,0.1", "--trials", "1000", "--seed", "11"], "json"),
        (["bound", "--channel", "adder", "--delta", "0.2", "--K", "2", "--M", "16",
          "--eps", "0.05,0.1,0.1", "--n", "20,120", "--n0", "12", "--gamma0", "0.2",
          "--trials", "1e4", "--seed", "5"], "json"),
        (["detect", "--channel", "adder", "--delta", "0.2", "--K", "2", "--test", "ks",
          "--n0", "200", "--eps0", "0.05", "--trials", "1e4", "--seed", "3"], "json"),
        (["rate-region", "--channel", "binary", "--a", "0.7", "--b", "0.11", "--logm", "1000",
          "--eps", "1e-3", "--grid", "0.05"], "csv"),
    ]
    for i, (argv, ext) in enumerate(cmds):
        outs = []
        for rep in range(2):
            path = tmp_path / f"out{i}_{rep}.{ext}"
            assert run(argv + ["--out", str(path)]) == 0
            outs.append(path.read_bytes())
        same.append(outs[0] == outs[1])
    ok = not bad and all(same)
    report(8, "round trip and determinism", ok,
           f"{trips - len(bad)}/{trips} round trips within +1, "
           f"{sum(same)}/{len(same)} byte-identical reruns")
    assert ok
