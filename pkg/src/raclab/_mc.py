"""Seed streams, chunking and thread pools shared by the Monte Carlo code.

Every random draw comes from ``SeedSequence(seed, spawn_key=key)`` where the
key names the purpose and the chunk index.  Chunk boundaries depend only on
the trial count, so results are identical for any number of workers.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from math import sqrt

import numpy as np
from scipy.stats import norm

CHUNK = 1 << 14
THREADS_ENV = "RACLAB_THREADS"


def stream(seed, *key):
    """Generator for the stream named by integer ``key`` under ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def chunks(trials, size=CHUNK):
    """``(index, count)`` pairs covering ``trials``."""
    out, i = [], 0
    while trials > 0:
        c = min(size, trials)
        out.append((i, c))
        trials -= c
        i += 1
    return out


def resolve_threads(threads=None):
    if threads is None:
        threads = os.environ.get(THREADS_ENV, 1)
    try:
        threads = int(threads)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be an integer") from None
    return max(1, threads)


def pmap(fn, items, threads=None):
    """Ordered map, threaded when more than one worker is requested."""
    threads = resolve_threads(threads)
    items = list(items)
    if threads == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(min(threads, len(items))) as ex:
        return list(ex.map(fn, items))


def binomial_se(hits, trials):
    p = hits / trials
    return sqrt(p * (1 - p) / trials)


def wilson_interval(hits, trials, level=0.95):
    """Wilson score interval for a binomial proportion."""
    if trials == 0:
        return (0.0, 1.0)
    z = norm.isf((1 - level) / 2)
    p = hits / trials
    den = 1 + z * z / trials
    mid = (p + z * z / (2 * trials)) / den
    half = z * sqrt(p * (1 - p) / trials + z * z / (4 * trials**2)) / den
    return (max(0.0, mid - half), min(1.0, mid + half))


def check_trials(trials, minimum):
    if int(trials) != trials or trials < minimum:
        raise ValueError(f"trials must be an integer >= {minimum:g}, got {trials!r}")
    return int(trials)
