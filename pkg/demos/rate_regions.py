"""Rate pairs of the two-user binary example over a grid of Bernoulli inputs.

Run: python demos/rate_regions.py
"""
import numpy as np

from raclab import make_binary_example
from raclab.design import sweep_rate_region

for a, b in [(0.11, 0.11), (0.7, 0.11)]:
    reg = sweep_rate_region(make_binary_example(a, b), logM_bits=1000, eps=1e-3)
    dom = reg.dominant()
    print(f"a={a}, b={b}: {len(reg.rows)} grid points, {len(dom)} dominant")
    best = max(dom, key=lambda r: r["R1"] + r["R2"])
    print(f"  best sum rate at p={best['p']}: (R1, R2) = ({best['R1']:.3f}, {best['R2']:.3f}),"
          f" (n1, n2) = ({best['n1']}, {best['n2']})")
    for r in dom[:: max(1, len(dom) // 5)]:
        print(f"  p={r['p']:.3f}  R1={r['R1']:.3f}  R2={r['R2']:.3f}")
    R = np.array([(r["R1"], r["R2"]) for r in reg.rows])
    print(f"  R1 range {R[:, 0].min():.3f}..{R[:, 0].max():.3f}")
