"""Monte Carlo simulation of one epoch of the rateless threshold code.

An epoch draws a fresh i.i.d. codebook, lets ``k`` users pick messages
uniformly, sends ``n_K`` channel symbols, runs the zero test on the first
``n_0`` outputs and then tries decoding times ``n_1, ..., n_K`` in order.
At time ``n_t`` every ordered ``t``-tuple of distinct messages is scored by
its accumulated ``t``-user information density; the first time any tuple
clears ``log gamma_t`` the decoder stops.  Several clearing tuples are a tie
and count as an error.
"""
from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from math import comb

import numpy as np

from . import _mc
from .bound import tie_tolerance
from .detect import TestSpec
from .infodensity import density_table, output_pmf

CATEGORIES = ("zero_false_stop", "outage", "early_decode", "confusion", "repetition")
MAX_TUPLES = 50_000
_TUPLE_BLOCK = 4096


class BudgetError(RuntimeError):
    """Exhaustive tuple search would exceed the configured cap."""


@dataclass
class Codebook:
    """``M`` i.i.d. codewords of length ``n``; row ``w`` encodes message ``w``."""

    words: np.ndarray
    seed: object = None

    @classmethod
    def draw(cls, M, n, px, rng, seed=None):
        cdf = np.cumsum(px.pmf)
        words = np.minimum(np.searchsorted(cdf, rng.random((M, n)), side="right"), len(cdf) - 1)
        return cls(words.astype(np.int64), seed)

    @property
    def M(self):
        return self.words.shape[0]


@dataclass
class EpochOutcome:
    true_k: int
    decoded_at: object
    decoded_messages: object
    correct: bool
    error_category: object
    feedback_bits: int
    ties: int = 0


class _Decoder:
    """Precomputed density tables and tuple lists for one design."""

    def __init__(self, ch, px, design, max_tuples=MAX_TUPLES):
        self.ch, self.design = ch, design
        K, M = design.K, design.M
        self.tables, self.tuples = {}, {}
        for t in range(1, K + 1):
            if comb(M, t) > max_tuples:
                raise BudgetError(f"C({M},{t}) = {comb(M, t)} tuples exceeds cap {max_tuples}")
            tab = density_table(ch, px, t, t, 0)
            self.tables[t] = tab.reshape(-1, ch.n_outputs)
            tup = np.array(list(itertools.combinations(range(M), t)), dtype=np.int64)
            self.tuples[t] = tup.reshape(-1, t)
        null = output_pmf(ch, px, 0)
        self.zero = TestSpec(design.zero_test, design.gamma0, null)
        self.pmf0 = null

    def scores(self, words, y, t):
        """Accumulated density of every ``t``-tuple over the first ``n_t`` symbols."""
        nt = self.design.n[t]
        nx = self.ch.n_inputs
        cw = words[:, :nt]
        yt = y[:nt]
        flat = self.tables[t]
        tup = self.tuples[t]
        out = np.empty(len(tup))
        for lo in range(0, len(tup), _TUPLE_BLOCK):
            blk = tup[lo:lo + _TUPLE_BLOCK]
            idx = np.zeros((len(blk), nt), dtype=np.int64)
            for i in range(t):
                idx = idx * nx + cw[blk[:, i]]
            out[lo:lo + len(blk)] = flat[idx, yt].sum(axis=1)
        return out


def _draw_outputs(ch, k, inputs, n, rng):
    """Channel outputs for ``k`` users sending ``inputs`` (shape ``(k, n)``)."""
    if k == 0:
        rows = np.broadcast_to(ch.silence_output, (n, ch.n_outputs))
    else:
        rows = ch.tensor(k)[tuple(inputs)]
    cdf = np.cumsum(rows, axis=1)
    u = rng.random(n)[:, None]
    return np.minimum((u >= cdf).sum(axis=1), ch.n_outputs - 1)


def _run(dec, codebook, k, messages, rng):
    ch, design = dec.ch, dec.design
    K = design.K
    messages = tuple(int(m) for m in messages)
    if len(messages) != k:
        raise ValueError(f"need {k} messages")
    if any(not 0 <= m < codebook.M for m in messages):
        raise ValueError("message index out of range")
    repeated = len(set(messages)) < k
    nK = design.n[K]
    inputs = codebook.words[list(messages), :nK] if k else np.zeros((0, nK), dtype=np.int64)
    y = _draw_outputs(ch, k, inputs, nK, rng)

    counts = np.bincount(y[:design.n[0]], minlength=ch.n_outputs)
    if dec.zero.accepts_null(counts)[0]:
        ok = k == 0
        return EpochOutcome(k, 0, (), ok, None if ok else
                            ("repetition" if repeated else "zero_false_stop"), 1)

    for t in range(1, K + 1):
        sc = dec.scores(codebook.words, y, t)
        thr = design.log_gamma[t]
        hits = np.flatnonzero(sc > thr + tie_tolerance(thr))
        if hits.size == 0:
            continue
        pick = hits[rng.integers(hits.size)] if hits.size > 1 else hits[0]
        decoded = tuple(int(w) for w in dec.tuples[t][pick])
        ok = (t == k and hits.size == 1 and not repeated
              and decoded == tuple(sorted(messages)))
        if ok:
            cat = None
        elif repeated:
            cat = "repetition"
        elif k == 0 or t > k:
            cat = "outage"
        elif t < k:
            cat = "early_decode"
        else:
            cat = "confusion"
        return EpochOutcome(k, t, decoded, ok, cat, t + 1, int(hits.size))

    return EpochOutcome(k, None, None, False, "repetition" if repeated else "outage", K + 1)


def run_epoch(ch, px, design, codebook, k, messages, seed):
    """Simulate one epoch with a given codebook and sent messages.

    ``seed`` (int or ``numpy.random.Generator``) drives the channel noise and
    the tie-break.
    """
    if not 0 <= k <= design.K:
        raise ValueError(f"k={k} outside 0..{design.K}")
    rng = seed if isinstance(seed, np.random.Generator) else _mc.stream(seed, 0)
    return _run(_Decoder(ch, px, design), codebook, k, messages, rng)


@dataclass
class SimulationResult:
    """Aggregated epoch outcomes for ``k`` active users."""

    k: int
    trials: int
    seed: int
    counts: dict
    decode_times: dict
    feedback_bits_total: int
    ties: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def errors(self):
        return self.trials - self.counts.get("correct", 0)

    @property
    def eps_hat(self):
        return self.errors / self.trials

    @property
    def se(self):
        return _mc.binomial_se(self.errors, self.trials)

    @property
    def wilson(self):
        return _mc.wilson_interval(self.errors, self.trials)

    @property
    def mean_feedback_bits(self):
        return self.feedback_bits_total / self.trials

    def rate(self, category):
        return self.counts.get(category, 0) / self.trials

    def to_dict(self):
        return {
            "k": self.k, "trials": self.trials, "seed": self.seed,
            "counts": {c: self.counts.get(c, 0) for c in ("correct",) + CATEGORIES},
            "eps_hat": self.eps_hat, "se": self.se, "wilson_95": list(self.wilson),
            "decode_times": {str(t): v for t, v in sorted(self.decode_times.items(), key=lambda kv: str(kv[0]))},
            "mean_feedback_bits": self.mean_feedback_bits,
            "ties": self.ties,
        }


def _epoch_block(args):
    ch, px, design, k, seed, lo, hi, frozen, max_tuples = args
    dec = _Decoder(ch, px, design, max_tuples)
    counts, times = Counter(), Counter()
    fb = ties = 0
    nK = design.n[design.K]
    for e in range(lo, hi):
        rng = _mc.stream(seed, 1, k, e)
        cb = frozen if frozen is not None else Codebook.draw(design.M, nK, px, rng, (seed, k, e))
        msgs = rng.integers(0, design.M, size=k)
        out = _run(dec, cb, k, msgs, rng)
        counts["correct" if out.correct else out.error_category] += 1
        times["never" if out.decoded_at is None else out.decoded_at] += 1
        fb += out.feedback_bits
        ties += out.ties > 1
    return counts, times, fb, ties


def estimate_error_rates(ch, px, design, k, trials, seed, threads=None,
                         freeze_codebook=False, max_tuples=MAX_TUPLES, min_trials=10**3):
    """Empirical error rate over ``trials`` independent epochs.

    A fresh codebook is drawn for every epoch by default; with
    ``freeze_codebook=True`` one codebook (from the master seed) is reused.
    Epoch ``e`` always uses stream ``(seed, k, e)``, so results do not
    depend on ``threads``.
    """
    trials = _mc.check_trials(trials, min_trials)
    if not 0 <= k <= min(design.K, ch.K):
        raise ValueError(f"k={k} outside the design")
    frozen = None
    if freeze_codebook:
        frozen = Codebook.draw(design.M, design.n[design.K], px, _mc.stream(seed, 2), seed)
    blocks = [(ch, px, design, k, seed, lo, min(lo + 500, trials), frozen, max_tuples)
              for lo in range(0, trials, 500)]
    counts, times = Counter(), Counter()
    fb = ties = 0
    for c, tm, f, ti in _mc.pmap(_epoch_block, blocks, threads):
        counts.update(c)
        times.update(tm)
        fb += f
        ties += ti
    return SimulationResult(k, trials, int(seed), dict(counts), dict(times), fb, ties)
