"""Compile a DFA into a recurrent weight matrix.

The matrix is the superposition of three outer-product terms built from
per-state attractor vectors ``q``, per-state bridge vectors ``b`` and
block-constant bipolar input vectors ``s_bar``::

    W_attr  = sum_q (q - f)(q - f)^T
    W_brdg  = sum_q (q - f)(b - f)^T + sum_s (b - q)((b - f) o s_bar)^T
    W_trans = sum_{(q, s, q') in E} (b' - q)((q - f) o s_bar)^T

``E`` holds the non-loop transitions and ``o`` is the Hadamard product.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.linalg import hadamard

from .dfa import Dfa
from .vsa import BmapHypervector, DimensionMismatch, SbcHypervector, gen_bmap, gen_sbc

PROVENANCES = ("ideal", "binarized", "noisy", "ternary", "fixed_point")


@dataclass
class EmbeddingCodebook:
    """Hypervectors assigned to a DFA.

    ``q`` and ``b`` are (|Q|, N) binary arrays in state order, ``s_bar`` is an
    (|S|, N) bipolar array in input order.
    """

    states: tuple[str, ...]
    inputs: tuple[str, ...]
    q: np.ndarray
    b: np.ndarray
    s_bar: np.ndarray
    n: int
    l: int
    mode: str = "random"

    @property
    def m(self) -> int:
        return self.n // self.l

    @property
    def f(self) -> float:
        return 1.0 / self.l

    def state_index(self, q: str) -> int:
        return self.states.index(q)

    def input_index(self, s: str) -> int:
        return self.inputs.index(s)

    def mask_for(self, s: str | None) -> np.ndarray:
        """Binary mask (1 = neuron may fire) for input ``s``; ``None`` means no input."""
        if s is None:
            return np.ones(self.n, dtype=np.int8)
        return ((self.s_bar[self.input_index(s)] + 1) // 2).astype(np.int8)

    @property
    def q_vecs(self) -> dict[str, SbcHypervector]:
        return {name: SbcHypervector(self.q[i], self.l) for i, name in enumerate(self.states)}

    @property
    def b_vecs(self) -> dict[str, SbcHypervector]:
        return {name: SbcHypervector(self.b[i], self.l) for i, name in enumerate(self.states)}

    @property
    def s_vecs(self) -> dict[str, BmapHypervector]:
        return {name: BmapHypervector(self.s_bar[i], self.l) for i, name in enumerate(self.inputs)}


def _balanced_orthogonal_signs(m: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """k mutually orthogonal, balanced +-1 vectors of length m."""
    if m & (m - 1) == 0 and k <= m - 1:
        h = hadamard(m).astype(np.int8)
        rows = rng.choice(np.arange(1, m), size=k, replace=False)
        return h[rows][:, rng.permutation(m)]
    if m % 2:
        raise DimensionMismatch(f"cannot draw balanced sign vectors over {m} blocks")
    base = np.repeat(np.array([1, -1], dtype=np.int8), m // 2)
    return np.stack([rng.permutation(base) for _ in range(k)])


def make_codebook(d: Dfa, n: int, l: int, rng: np.random.Generator, mode: str = "random") -> EmbeddingCodebook:
    """Draw state, bridge and input vectors for ``d``.

    In ``orthogonal`` mode every q and b vector occupies its own offset in
    every block, so all of them are pairwise disjoint, and the input vectors
    are balanced and mutually orthogonal.
    """
    if n % l:
        raise DimensionMismatch(f"block length {l} does not divide {n}")
    nq, ns, m = len(d.states), len(d.inputs), n // l
    if mode == "random":
        q = np.stack([gen_sbc(n, l, rng).data for _ in range(nq)])
        b = np.stack([gen_sbc(n, l, rng).data for _ in range(nq)])
        s_bar = np.stack([gen_bmap(n, l, rng).data for _ in range(ns)]) if ns else np.zeros((0, n))
    elif mode == "orthogonal":
        if 2 * nq > l:
            raise ValueError(f"orthogonal mode needs 2*|Q| <= L, got |Q|={nq}, L={l}")
        offsets = np.stack([rng.permutation(l)[: 2 * nq] for _ in range(m)], axis=1)
        onehot = np.zeros((2 * nq, m, l), dtype=np.int8)
        for k in range(2 * nq):
            onehot[k, np.arange(m), offsets[k]] = 1
        onehot = onehot.reshape(2 * nq, n)
        q, b = onehot[:nq], onehot[nq:]
        s_bar = np.repeat(_balanced_orthogonal_signs(m, ns, rng), l, axis=1) if ns else np.zeros((0, n))
    else:
        raise ValueError(f"unknown codebook mode {mode!r}")
    return EmbeddingCodebook(d.states, d.inputs, q.astype(np.int8), b.astype(np.int8),
                             s_bar.astype(np.int8), n, l, mode)


# -- weight matrix ------------------------------------------------------------

@dataclass
class WeightMatrix:
    w: np.ndarray
    l: int
    provenance: str = "ideal"
    f_used: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.w.ndim != 2 or self.w.shape[0] != self.w.shape[1]:
            raise DimensionMismatch("weight matrix must be square")

    @property
    def n(self) -> int:
        return self.w.shape[0]

    def stats(self) -> tuple[float, float]:
        return float(self.w.mean()), float(self.w.std())

    def save(self, path) -> None:
        header = {"n": self.n, "l": self.l, "provenance": self.provenance, "f_used": self.f_used}
        with open(path, "wb") as fh:
            fh.write(json.dumps(header).encode() + b"\n")
            fh.write(np.ascontiguousarray(self.w, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> WeightMatrix:
        raw = Path(path).read_bytes()
        head, _, body = raw.partition(b"\n")
        h = json.loads(head)
        n = int(h["n"])
        w = np.frombuffer(body, dtype="<f8")
        if w.size != n * n:
            raise DimensionMismatch(f"payload holds {w.size} values, expected {n * n}")
        return cls(w.reshape(n, n).astype(np.float64), int(h["l"]), h["provenance"], float(h["f_used"]))


def _coding_offset(c: EmbeddingCodebook, f: float | None) -> float:
    if f is not None:
        return f
    return 0.0 if c.mode == "orthogonal" else c.f


def _incoming_inputs(d: Dfa) -> dict[str, list[str]]:
    seen: dict[str, list[str]] = {q: [] for q in d.states}
    for _, s, q2 in d.edges:
        if s not in seen[q2]:
            seen[q2].append(s)
    return seen


def build_components(d: Dfa, c: EmbeddingCodebook, f: float | None = None,
                     bridge_inputs: str = "all") -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The attractor, bridge and transition terms as three dense matrices.

    ``bridge_inputs='incoming'`` sums the bridge term only over the symbols
    that label edges into each state instead of over every symbol.
    """
    if tuple(d.states) != c.states or tuple(d.inputs) != c.inputs:
        missing = (set(d.states) - set(c.states)) | (set(d.inputs) - set(c.inputs))
        raise KeyError(f"codebook does not match the DFA (missing {sorted(missing)})")
    f = _coding_offset(c, f)
    q = c.q.astype(np.float64)
    b = c.b.astype(np.float64)
    sb = c.s_bar.astype(np.float64)
    qf, bf = q - f, b - f

    w_attr = qf.T @ qf

    if bridge_inputs == "all":
        sigma = np.broadcast_to(sb.sum(axis=0) if len(sb) else np.zeros(c.n), q.shape)
    elif bridge_inputs == "incoming":
        inc = _incoming_inputs(d)
        sigma = np.stack([sb[[c.input_index(s) for s in inc[name]]].sum(axis=0) if inc[name]
                          else np.zeros(c.n) for name in c.states])
    else:
        raise ValueError(f"bridge_inputs must be 'all' or 'incoming', not {bridge_inputs!r}")
    w_brdg = qf.T @ bf + (b - q).T @ (bf * sigma)

    edges = d.edges
    if edges:
        src = np.array([c.state_index(e[0]) for e in edges])
        sym = np.array([c.input_index(e[1]) for e in edges])
        dst = np.array([c.state_index(e[2]) for e in edges])
        w_trans = (b[dst] - q[src]).T @ (qf[src] * sb[sym])
    else:
        w_trans = np.zeros((c.n, c.n))
    return w_attr, w_brdg, w_trans


def zero_intra_block(w: np.ndarray, l: int) -> np.ndarray:
    """Copy of ``w`` with every coupling between neurons of the same block set to 0."""
    out = w.copy()
    m = w.shape[0] // l
    v = out.reshape(m, l, m, l)
    v[np.arange(m), :, np.arange(m), :] = 0.0
    return out


def build_weights(d: Dfa, c: EmbeddingCodebook, f: float | None = None, bridge_inputs: str = "all",
                  intra_block: bool = True) -> WeightMatrix:
    """Full recurrent matrix W = W_attr + W_brdg + W_trans.

    ``f`` defaults to 1/L for random codebooks and 0 for orthogonal ones.
    With ``intra_block=False`` couplings inside a block are removed.
    """
    f_used = _coding_offset(c, f)
    w_attr, w_brdg, w_trans = build_components(d, c, f_used, bridge_inputs)
    w = w_attr + w_brdg + w_trans
    if not intra_block:
        w = zero_intra_block(w, c.l)
    return WeightMatrix(w, c.l, "ideal", f_used)


def build_attractor_weights(q: np.ndarray, l: int, f: float, intra_block: bool = True) -> WeightMatrix:
    """Only the autoassociative term, from a (P, N) array of stored patterns."""
    qf = np.asarray(q, dtype=np.float64) - f
    w = qf.T @ qf
    if not intra_block:
        w = zero_intra_block(w, l)
    return WeightMatrix(w, l, "ideal", f)


# -- nonideality transforms ---------------------------------------------------

def _require(w: WeightMatrix, *allowed: str) -> None:
    if w.provenance not in allowed:
        raise ValueError(f"transform expects {' or '.join(allowed)} weights, got {w.provenance}")


def binarize_stochastic(w: WeightMatrix, beta: float = 2.0, rng: np.random.Generator | None = None) -> WeightMatrix:
    """Set each weight to 1 with probability sigmoid(beta (w - <w>) / sigma_w), else 0."""
    _require(w, "ideal")
    rng = rng if rng is not None else np.random.default_rng()
    mean, std = w.stats()
    z = beta * (w.w - mean) / std if std > 0 else np.zeros_like(w.w)
    p = 1.0 / (1.0 + np.exp(-z))
    out = (rng.random(w.w.shape) < p).astype(np.float64)
    return replace(w, w=out, provenance="binarized", meta={**w.meta, "beta": beta})


def add_weight_noise(w: WeightMatrix, sigma: float = 0.5, rng: np.random.Generator | None = None) -> WeightMatrix:
    """|w + chi| with chi ~ N(0, sigma^2) drawn independently per entry."""
    rng = rng if rng is not None else np.random.default_rng()
    if sigma == 0:
        out = np.abs(w.w)
    else:
        out = np.abs(w.w + rng.normal(0.0, sigma, size=w.w.shape))
    return replace(w, w=out, provenance="noisy", meta={**w.meta, "noise_sigma": sigma})


def quantize_ternary(w: WeightMatrix, t_lo: float | None = None, t_hi: float | None = None,
                     intra_block_low: bool = False) -> WeightMatrix:
    """Map to levels {0, 0.5, 1} with two thresholds (default -/+ 0.5 sigma_w).

    ``intra_block_low`` programs every coupling between two different neurons
    of the same block to the lowest level; self-couplings keep their level.
    """
    _, std = w.stats()
    t_lo = -0.5 * std if t_lo is None else t_lo
    t_hi = 0.5 * std if t_hi is None else t_hi
    if t_lo > t_hi:
        raise ValueError("t_lo must not exceed t_hi")
    out = np.full(w.w.shape, 0.5)
    out[w.w < t_lo] = 0.0
    out[w.w > t_hi] = 1.0
    if intra_block_low:
        m = w.n // w.l
        diag = out.diagonal().copy()
        out.reshape(m, w.l, m, w.l)[np.arange(m), :, np.arange(m), :] = 0.0
        np.fill_diagonal(out, diag)
    return replace(w, w=out, provenance="ternary", meta={**w.meta, "t_lo": t_lo, "t_hi": t_hi})


def quantize_fixed_point(w: WeightMatrix) -> WeightMatrix:
    """Clamp to <w> +- 4 sigma_w and map linearly onto the even integers in [-254, 254]."""
    mean, std = w.stats()
    if std == 0:
        return replace(w, w=np.zeros_like(w.w), provenance="fixed_point")
    x = np.clip((w.w - mean) / (4.0 * std), -1.0, 1.0) * 254.0
    out = 2.0 * np.round(x / 2.0)
    return replace(w, w=out, provenance="fixed_point")


# -- postsynaptic-sum statistics ----------------------------------------------

@dataclass(frozen=True)
class HStats:
    """Predicted postsynaptic sum: mean for target-active and other components, plus noise std."""

    mean_active: float
    mean_inactive: float
    std: float

    @property
    def signal(self) -> float:
        return self.mean_active - self.mean_inactive


def predict_h_stats(d: Dfa, c: EmbeddingCodebook, condition: str = "at_state",
                    form: str = "approx", bridge_inputs: str = "all") -> HStats:
    """Mean and cross-talk std of h = W z for z = q (``at_state``) or q AND s (``at_state_masked``).

    ``form='approx'`` uses the large-Q, small-f closed forms; ``form='exact'``
    keeps the (1 - f) factors.  Bridge cross-talk counts all S inputs unless
    ``bridge_inputs='incoming'``, where S is replaced by the mean number of
    distinct symbols on edges entering a state.
    """
    if c.mode != "random":
        raise ValueError("the h-statistics prediction assumes a random codebook")
    m, f = c.m, c.f
    nq, ns, ne = len(d.states), len(d.inputs), len(d.edges)
    sb = ns
    if bridge_inputs == "incoming":
        inc = _incoming_inputs(d)
        sb = sum(len(v) for v in inc.values()) / nq
    g = 1.0 - f
    if condition == "at_state":
        if form == "approx":
            var = m * (f * f * nq * (2 + 2 * sb) + 2 * f * f * ne + 2 * f * ns)
            return HStats(m * (1 - f), -m * f, math.sqrt(var))
        var = ((f * g) ** 2 * (nq - 1) * m
               + (f * g) ** 2 * m * nq * (1 + 2 * sb)
               + g * g * (2 * m * f * f * (ne - ns) + 2 * m * ns * f * g))
        return HStats(m * g * g, -m * g * f, math.sqrt(var))
    if condition == "at_state_masked":
        if form == "approx":
            var = m * (f * f * nq * (1 + sb) + f * f * ne + f * (ns - 1))
            return HStats(0.5 * m * (1 - f), -0.5 * m * f, math.sqrt(var))
        var = ((f * g) ** 2 * (nq - 1) * m / 2
               + (f * g) ** 2 * m * nq * (1 + 2 * sb) / 2
               + g * g * m * (f * f * (ne - ns + 1) + (ns - 1) * f * g))
        return HStats(0.5 * m * g * g, -0.5 * m * g * f, math.sqrt(var))
    raise ValueError(f"unknown condition {condition!r}")


# -- energy -------------------------------------------------------------------

def energy(w, z) -> float:
    """E(z) = -z^T W z."""
    mat = w.w if isinstance(w, WeightMatrix) else np.asarray(w)
    zz = np.asarray(z, dtype=np.float64)
    return float(-(zz @ mat @ zz))


def attractor_energy(patterns: np.ndarray, z, f: float) -> float:
    """-sum_q (z . (q - f))^2, equal to energy(W_attr, z) for the full attractor matrix."""
    proj = (np.asarray(patterns, dtype=np.float64) - f) @ np.asarray(z, dtype=np.float64)
    return float(-(proj @ proj))
