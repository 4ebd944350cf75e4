"""Independent reference computations shared by the test modules."""
from collections import defaultdict

import numpy as np


def convolve_tail(values, probs, n, threshold, upper):
    """P[sum of n i.i.d. letters > threshold] (``upper``) or ``<= threshold``.

    Plain n-fold convolution of the letter law held as a dict; values are
    keyed to 1e-12 so equal sums merge.  A ``-inf`` letter absorbs the sum.
    """
    law = {0.0: 1.0}
    for _ in range(n):
        nxt = defaultdict(float)
        for s, ps in law.items():
            for v, pv in zip(values, probs):
                t = -np.inf if (s == -np.inf or v == -np.inf) else round(s + v, 12)
                nxt[t] += ps * pv
        law = nxt
    tol = 1e-9 * max(1.0, abs(threshold))   # exact ties count as equality
    if upper:
        return sum(p for s, p in law.items() if s > threshold + tol)
    return sum(p for s, p in law.items() if s <= threshold + tol)
