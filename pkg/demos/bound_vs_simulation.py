"""Evaluate the random-coding error bound and compare with simulated epochs.

Adder-erasure channel with delta = 0.2, two users and 16 messages.

Run: python demos/bound_vs_simulation.py
"""
from raclab import InputDistribution, make_adder_erasure
from raclab.bound import TERMS, evaluate_bound
from raclab.design import choose_parameters
from raclab.infodensity import statistics
from raclab.sim import estimate_error_rates

ch = make_adder_erasure(2, 0.2)
px = InputDistribution.bernoulli(0.5)
design = choose_parameters(statistics(ch, px), M=16, eps=(0.05, 0.1, 0.1), n=(20, 120),
                           n0=12, gamma0=0.2)
print("blocklengths n0..n2:", design.n)
print("log thresholds:", [round(g, 3) for g in design.log_gamma[1:]])

for k in range(3):
    rep = evaluate_bound(ch, px, design, k, trials=10**5, seed=1)
    sim = estimate_error_rates(ch, px, design, k, trials=5000, seed=2)
    terms = ", ".join(f"{t}={rep.term(t):.4f}" for t in TERMS if rep.term(t) > 0)
    lo, hi = sim.wilson
    print(f"k={k}: bound {rep.total:.4f} ({terms})")
    print(f"      simulated {sim.eps_hat:.4f} [{lo:.4f}, {hi:.4f}], "
          f"mean feedback bits {sim.mean_feedback_bits:.2f}")
    errs = {c: v for c, v in sim.counts.items() if c != "correct"}
    print(f"      error categories {errs}")
