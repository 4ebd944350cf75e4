"""Finite-alphabet random access channel families.

A family holds one memoryless MAC for every number of active transmitters
``k = 0..K``.  Kernels are keyed by the *multiset* of inputs (a count vector
over the input alphabet), so permutation invariance holds by construction.
Input index 0 is the silence symbol.

Every output alphabet ``Y_k`` is stored as a set of indices into the global
alphabet ``Y_K``; kernel rows are vectors over the global alphabet with zero
mass outside ``Y_k``.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from math import prod

import numpy as np

ATOL = 1e-12
MAX_TABLE_ENTRIES = 10**7

ERASURE = "e"


class ChannelError(ValueError):
    """Raised for malformed channel families or input distributions."""


def counts_of(xs, n_inputs):
    """Count vector of a sequence of input indices."""
    c = [0] * n_inputs
    for x in xs:
        c[x] += 1
    return tuple(c)


def multisets(k, n_inputs):
    """All count vectors of size ``k`` over ``n_inputs`` symbols."""
    for combo in itertools.combinations_with_replacement(range(n_inputs), k):
        yield counts_of(combo, n_inputs)


class ChannelFamily:
    """Reducible, permutation-invariant family ``{P_{Y_k|X_[k]}}``.

    Parameters
    ----------
    K : int
        Maximum number of transmitters.
    inputs : sequence
        Input labels; ``inputs[0]`` is silence.
    outputs : sequence
        Global output labels (the alphabet of ``Y_K``).
    output_sets : sequence of sequence of int
        For each ``k = 0..K`` the indices of ``Y_k`` inside ``outputs``.
    kernel : dict
        Maps ``(k, counts)`` to a probability vector over ``outputs``.
    name : str, optional
        Free-form description used in reports.
    """

    def __init__(self, K, inputs, outputs, output_sets, kernel, name=""):
        if K < 1:
            raise ChannelError("K must be at least 1")
        self.K = int(K)
        self.inputs = tuple(inputs)
        self.outputs = tuple(outputs)
        self.output_sets = tuple(tuple(sorted(int(i) for i in s)) for s in output_sets)
        self.name = name
        if len(self.output_sets) != self.K + 1:
            raise ChannelError("need one output set per k = 0..K")
        nx, ny = len(self.inputs), len(self.outputs)
        if nx < 2:
            raise ChannelError("input alphabet needs silence plus at least one symbol")
        if nx**self.K * ny > MAX_TABLE_ENTRIES:
            raise ChannelError(
                f"table of {nx}**{self.K}*{ny} entries exceeds {MAX_TABLE_ENTRIES}"
            )
        for s in range(self.K):
            if not set(self.output_sets[s]) <= set(self.output_sets[s + 1]):
                raise ChannelError(f"Y_{s} is not contained in Y_{s + 1}")

        self._kernel = {}
        for k in range(self.K + 1):
            inside = np.zeros(ny, dtype=bool)
            inside[list(self.output_sets[k])] = True
            for m in multisets(k, nx):
                if (k, m) not in kernel:
                    raise ChannelError(f"missing kernel row for k={k}, multiset={m}")
                row = np.asarray(kernel[(k, m)], dtype=float)
                if row.shape != (ny,):
                    raise ChannelError(f"kernel row (k={k}, {m}) has shape {row.shape}")
                if np.any(row < 0):
                    raise ChannelError(f"negative probability in row (k={k}, {m})")
                if abs(row.sum() - 1.0) > ATOL:
                    raise ChannelError(f"row (k={k}, {m}) sums to {row.sum()!r}")
                if np.any(row[~inside] > 0):
                    raise ChannelError(f"row (k={k}, {m}) puts mass outside Y_{k}")
                row = row.copy()
                row.setflags(write=False)
                self._kernel[(k, m)] = row
        self._tensors = {}
        defect = self.reducibility_defect()
        if defect > ATOL:
            raise ChannelError(f"family is not reducible (defect {defect:.3g})")

    @property
    def n_inputs(self):
        return len(self.inputs)

    @property
    def n_outputs(self):
        return len(self.outputs)

    def kernel(self, k, xs):
        """Output distribution for ``k`` users sending input indices ``xs``."""
        if not 0 <= k <= self.K:
            raise ChannelError(f"k={k} outside 0..{self.K}")
        if len(xs) != k:
            raise ChannelError(f"expected {k} inputs, got {len(xs)}")
        for x in xs:
            if not 0 <= x < self.n_inputs:
                raise ChannelError(f"input symbol {x} out of alphabet")
        return self._kernel[(k, counts_of(xs, self.n_inputs))]

    def rows(self):
        """Iterate over ``((k, counts), row)`` pairs."""
        return iter(self._kernel.items())

    def tensor(self, k):
        """Dense kernel of shape ``(|X|,)*k + (|Y|,)``."""
        if k not in self._tensors:
            nx, ny = self.n_inputs, self.n_outputs
            T = np.empty((nx,) * k + (ny,))
            for xs in itertools.product(range(nx), repeat=k):
                T[xs] = self._kernel[(k, counts_of(xs, nx))]
            T.setflags(write=False)
            self._tensors[k] = T
        return self._tensors[k]

    def in_output_set(self, k):
        """Boolean mask of ``Y_k`` over the global output alphabet."""
        mask = np.zeros(self.n_outputs, dtype=bool)
        mask[list(self.output_sets[k])] = True
        return mask

    @property
    def silence_output(self):
        """``P_{Y_0}``."""
        return self._kernel[(0, (0,) * self.n_inputs)]

    def reducibility_defect(self):
        """Largest entrywise violation of the reducibility identity."""
        worst = 0.0
        nx = self.n_inputs
        for k in range(1, self.K + 1):
            for s in range(k):
                for m in multisets(s, nx):
                    padded = list(m)
                    padded[0] += k - s
                    lhs = self._kernel[(s, m)]
                    rhs = self._kernel[(k, tuple(padded))]
                    idx = list(self.output_sets[s])
                    worst = max(worst, float(np.max(np.abs(lhs[idx] - rhs[idx]))))
        return worst

    def to_json(self):
        """Serialize to the documented JSON document."""
        kernel = []
        for (k, m), row in sorted(self._kernel.items()):
            ms = [self.inputs[i] for i, c in enumerate(m) for _ in range(c)]
            kernel.append(
                {"k": k, "multiset": ms, "probs": [float(row[j]) for j in self.output_sets[k]]}
            )
        doc = {
            "K": self.K,
            "inputs": list(self.inputs),
            "outputs_per_k": [[self.outputs[j] for j in s] for s in self.output_sets],
            "kernel": kernel,
        }
        if self.name:
            doc["name"] = self.name
        return doc

    def __repr__(self):
        label = self.name or "ChannelFamily"
        return f"<{label}: K={self.K}, |X|={self.n_inputs}, |Y_K|={self.n_outputs}>"


@dataclass(frozen=True)
class InputDistribution:
    """Single-letter input pmf ``P_X`` (index 0 is silence)."""

    pmf: np.ndarray = field()

    def __post_init__(self):
        pmf = np.array(self.pmf, dtype=float)
        if pmf.ndim != 1 or pmf.size < 2:
            raise ChannelError("pmf must be a vector with at least two entries")
        if np.any(pmf < 0) or abs(pmf.sum() - 1.0) > ATOL:
            raise ChannelError(f"not a probability vector: {pmf}")
        pmf.setflags(write=False)
        object.__setattr__(self, "pmf", pmf)

    @classmethod
    def bernoulli(cls, p):
        if not 0.0 <= p <= 1.0:
            raise ChannelError(f"Bernoulli parameter {p} outside [0, 1]")
        return cls(np.array([1.0 - p, p]))

    def __len__(self):
        return self.pmf.size


def _check_prob(name, v):
    if not (0.0 <= v <= 1.0):
        raise ChannelError(f"{name}={v} outside [0, 1]")


def make_adder_erasure(K, delta):
    """Adder-erasure family: ``Y = sum(x)`` w.p. ``1 - delta``, erasure otherwise.

    The erasure symbol is the last output index, so on the real line it sits
    above every numeric output.
    """
    if K < 1:
        raise ChannelError("K must be at least 1")
    _check_prob("delta", delta)
    outputs = list(range(K + 1)) + [ERASURE]
    e = K + 1
    output_sets = [list(range(k + 1)) + [e] for k in range(K + 1)]
    kernel = {}
    for k in range(K + 1):
        for m in multisets(k, 2):
            row = np.zeros(K + 2)
            row[m[1]] += 1.0 - delta
            row[e] += delta
            kernel[(k, m)] = row
    return ChannelFamily(K, [0, 1], outputs, output_sets, kernel,
                         name=f"adder-erasure(K={K}, delta={delta})")


def make_binary_example(a, b):
    """Two-user binary family with ``P(Y=1|00)=b``, ``P(Y=1|01)=1-b``, ``P(Y=1|11)=a``.

    The one-user channel is a BSC(b) by reducibility.
    """
    _check_prob("a", a)
    _check_prob("b", b)
    p_one = {0: b, 1: 1.0 - b, 2: a}
    kernel = {}
    for k in range(3):
        for m in multisets(k, 2):
            q = p_one[m[1]]
            kernel[(k, m)] = np.array([1.0 - q, q])
    return ChannelFamily(2, [0, 1], [0, 1], [[0, 1]] * 3, kernel,
                         name=f"binary-example(a={a}, b={b})")


def make_noise_only(K, q):
    """Degenerate family whose output ignores the inputs (Bernoulli(q) noise).

    Inputs are independent given the output, so the interference assumption
    fails for every pair of users.
    """
    _check_prob("q", q)
    kernel = {(k, m): np.array([1.0 - q, q]) for k in range(K + 1) for m in multisets(k, 2)}
    return ChannelFamily(K, [0, 1], [0, 1], [[0, 1]] * (K + 1), kernel,
                         name=f"noise-only(K={K}, q={q})")


def random_reducible_family(rng, K=2, n_inputs=2, n_outputs=3, concentration=1.0):
    """Random permutation-invariant family built from its ``K``-user kernel.

    Lower-``k`` rows are obtained by padding with silence, so reducibility
    holds exactly and every ``Y_k`` equals the full alphabet.
    """
    top = {m: rng.dirichlet(np.full(n_outputs, concentration)) for m in multisets(K, n_inputs)}
    kernel = {}
    for k in range(K + 1):
        for m in multisets(k, n_inputs):
            padded = list(m)
            padded[0] += K - k
            kernel[(k, m)] = top[tuple(padded)]
    return ChannelFamily(K, list(range(n_inputs)), list(range(n_outputs)),
                         [list(range(n_outputs))] * (K + 1), kernel, name="random")


def channel_from_json(doc):
    """Build a family from the JSON document (dict or path).

    Rows for ``k < K`` may be omitted entirely; they are then derived by
    padding the ``K``-user rows with silence.
    """
    if isinstance(doc, (str, bytes)) or hasattr(doc, "__fspath__"):
        with open(doc) as fh:
            doc = json.load(fh)
    try:
        K = int(doc["K"])
        inputs = list(doc["inputs"])
        per_k = [list(ys) for ys in doc["outputs_per_k"]]
        entries = doc["kernel"]
    except (KeyError, TypeError) as exc:
        raise ChannelError(f"malformed channel document: {exc}") from None
    if len(per_k) != K + 1:
        raise ChannelError("outputs_per_k must list K+1 alphabets")
    outputs = per_k[K]
    pos = {y: j for j, y in enumerate(outputs)}
    xpos = {x: i for i, x in enumerate(inputs)}
    output_sets = []
    for k, ys in enumerate(per_k):
        missing = [y for y in ys if y not in pos]
        if missing:
            raise ChannelError(f"Y_{k} symbols {missing} not in Y_K")
        output_sets.append([pos[y] for y in ys])
    nx, ny = len(inputs), len(outputs)
    kernel = {}
    for ent in entries:
        k = int(ent["k"])
        try:
            xs = [xpos[x] for x in ent["multiset"]]
        except KeyError as exc:
            raise ChannelError(f"unknown input symbol {exc}") from None
        probs = list(ent["probs"])
        if len(probs) != len(output_sets[k]):
            raise ChannelError(f"row for k={k} has {len(probs)} probs, Y_{k} has "
                               f"{len(output_sets[k])}")
        row = np.zeros(ny)
        row[output_sets[k]] = probs
        kernel[(k, counts_of(xs, nx))] = row
    have_k = {k for k, _ in kernel}
    for k in range(K):
        if k not in have_k:
            for m in multisets(k, nx):
                padded = list(m)
                padded[0] += K - k
                top = kernel.get((K, tuple(padded)))
                if top is None:
                    raise ChannelError(f"cannot derive k={k} rows: K-user row missing")
                row = np.zeros(ny)
                idx = output_sets[k]
                row[idx] = top[idx]
                kernel[(k, m)] = row
    return ChannelFamily(K, inputs, outputs, output_sets, kernel, name=doc.get("name", ""))


def product_weights(px, k):
    """``prod_i px(x_i)`` as a tensor of shape ``(|X|,)*k``."""
    w = np.ones(())
    for _ in range(k):
        w = np.multiply.outer(w, px)
    return w


def table_size(ch):
    return prod([ch.n_inputs] * ch.K) * ch.n_outputs


@dataclass
class AssumptionReport:
    """Outcome of the structural checks with their numeric margins (nats)."""

    friendliness: bool
    friendliness_margin: float
    interference: bool
    interference_margin: float
    output_separation: bool
    delta0: float
    positive_dispersion: bool
    min_dispersion: float
    reducibility_defect: float

    @property
    def all_hold(self):
        return (self.friendliness and self.interference and self.output_separation
                and self.positive_dispersion)

    def to_dict(self):
        return {k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v))
                for k, v in self.__dict__.items()}


def check_assumptions(ch, px, tol=1e-12):
    """Check friendliness, interference, output separation and ``V_k > 0``.

    Friendliness compares ``I_s(X_[s]; Y_s)`` (the silent-rest information,
    by reducibility) with ``I_k(X_[s]; Y_k | X_[s+1:k])``.  Interference is
    measured by the conditional mutual information between disjoint input
    groups given the output, which is zero exactly when the factorization
    holds.
    """
    from . import infodensity as idn

    if table_size(ch) > MAX_TABLE_ENTRIES:
        raise ChannelError("table too large for exact enumeration")
    if len(px) != ch.n_inputs:
        raise ChannelError("input distribution does not match the input alphabet")
    st = idn.statistics(ch, px)
    friend = min(
        (st.mi[(s, s)] - st.cond_mi[(s, k)] for k in range(2, ch.K + 1) for s in range(1, k)),
        default=np.inf,
    )
    dep = min(
        (idn.conditional_dependence(ch, px, k, s, t)
         for k in range(2, ch.K + 1) for t in range(2, k + 1) for s in range(1, t)),
        default=np.inf,
    )
    d0 = float(np.min(st.ks_distances[1:]))
    vmin = float(np.min(st.V[1:]))
    return AssumptionReport(
        friendliness=bool(friend >= -tol),
        friendliness_margin=float(friend),
        interference=bool(dep > tol),
        interference_margin=float(dep),
        output_separation=bool(d0 > tol),
        delta0=d0,
        positive_dispersion=bool(vmin > tol),
        min_dispersion=vmin,
        reducibility_defect=ch.reducibility_defect(),
    )
