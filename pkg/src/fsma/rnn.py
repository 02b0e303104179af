"""Discrete-time block-WTA recurrent network.

z_{t+1} = bWTA[W (z_t AND i_t)], used for fast walk checks and capacity sweeps.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .compiler import (EmbeddingCodebook, WeightMatrix, binarize_stochastic, build_weights,
                       make_codebook)
from .dfa import Dfa, dfa_walk, gen_moddiv_dfa
from .vsa import DimensionMismatch, block_argmax

L0, N0 = 8, 2048


@dataclass
class RnnState:
    z: np.ndarray
    t: int = 0

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=np.int8)


@dataclass
class InputSchedule:
    """Sequence of (symbol or None, steps)."""

    segments: list[tuple[str | None, int]]

    def __post_init__(self):
        for _, k in self.segments:
            if int(k) < 1:
                raise ValueError("segment durations must be >= 1")

    @classmethod
    def for_word(cls, word: Sequence[str], on_steps: int = 10, off_steps: int = 10) -> InputSchedule:
        segs: list[tuple[str | None, int]] = []
        for s in word:
            segs.append((s, on_steps))
            segs.append((None, off_steps))
        return cls(segs)

    @property
    def total_steps(self) -> int:
        return sum(k for _, k in self.segments)


def _mat(w) -> np.ndarray:
    return w.w if isinstance(w, WeightMatrix) else np.asarray(w)


def rnn_step(w, z, mask=None, l: int | None = None) -> np.ndarray:
    """One synchronous update of every block. ``z`` may be (N,) or (N, batch)."""
    mat = _mat(w)
    l = l if l is not None else w.l
    z = np.asarray(z)
    if z.shape[0] != mat.shape[1]:
        raise DimensionMismatch(f"state has length {z.shape[0]}, W is {mat.shape}")
    if mask is not None:
        mask = np.asarray(mask)
        if mask.shape[0] != mat.shape[0]:
            raise DimensionMismatch("mask length differs from N")
        zin = z * (mask if z.ndim == 1 else mask[:, None])
    else:
        zin = z
    h = mat @ zin.astype(np.float64)
    if h.ndim == 1:
        return block_argmax(h, l, mask)
    return np.stack([block_argmax(h[:, k], l, mask) for k in range(h.shape[1])], axis=1)


def async_block_update(w, z: np.ndarray, block: int, l: int, mask=None) -> np.ndarray:
    """Recompute only ``block`` from the current state; returns a new state."""
    mat = _mat(w)
    zin = z if mask is None else z * mask
    sl = slice(block * l, (block + 1) * l)
    h = mat[sl] @ zin.astype(np.float64)
    out = z.copy()
    win = np.zeros(l, dtype=np.int8)
    if mask is None:
        win[int(np.argmax(h))] = 1
    else:
        mb = np.asarray(mask[sl]) != 0
        if mb.any():
            win[int(np.argmax(np.where(mb, h, -np.inf)))] = 1
    out[sl] = win
    return out


def rnn_step_async(w, z, mask=None, l: int | None = None, order: Iterable[int] | None = None) -> np.ndarray:
    """One sweep of single-block updates in ``order`` (default: block index order)."""
    l = l if l is not None else w.l
    z = np.asarray(z, dtype=np.int8)
    m = z.shape[0] // l
    for b in (range(m) if order is None else order):
        z = async_block_update(w, z, b, l, mask)
    return z


def relax(w, z, l: int | None = None, max_steps: int | None = None, mode: str = "sync"):
    """Iterate without input until a fixed point or a 2-cycle.

    Returns (state, steps, status) with status 'fixed', 'cycle2' or 'limit'.
    """
    l = l if l is not None else w.l
    z = np.asarray(z, dtype=np.int8)
    max_steps = max_steps if max_steps is not None else z.shape[0]
    prev = None
    for k in range(1, max_steps + 1):
        nz = rnn_step(w, z, None, l) if mode == "sync" else rnn_step_async(w, z, None, l)
        if np.array_equal(nz, z):
            return nz, k, "fixed"
        if prev is not None and np.array_equal(nz, prev):
            return nz, k, "cycle2"
        prev, z = z, nz
    return z, max_steps, "limit"


def decode_state(c: EmbeddingCodebook, z: np.ndarray) -> np.ndarray:
    """Index of the state vector with the largest overlap (per column for batches)."""
    return np.argmax(c.q.astype(np.float64) @ z.astype(np.float64), axis=0)


@dataclass
class WalkResult:
    final: str
    expected: str
    trace: list[str] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.final == self.expected


def run_walks(w, c: EmbeddingCodebook, d: Dfa, words: Sequence, on_steps: int = 10,
              off_steps: int = 10, record: bool = False) -> list[WalkResult]:
    """Drive several equal-length words through the network in one batch.

    Each word starts from the initial state's attractor.  The final state is
    decoded after the last off period.
    """
    words = [d.resolve_word(wd) for wd in words]
    if not words:
        return []
    if len({len(wd) for wd in words}) != 1:
        return [r for wd in words for r in run_walks(w, c, d, [wd], on_steps, off_steps, record)]
    k = len(words)
    z = np.repeat(c.q[c.state_index(d.initial)][:, None], k, axis=1).astype(np.int8)
    traces: list[list[str]] = [[] for _ in range(k)]
    mats = _mat(w)
    masks = {s: c.mask_for(s) for s in d.inputs}
    for pos in range(len(words[0])):
        m_on = np.stack([masks[wd[pos]] for wd in words], axis=1)
        for _ in range(on_steps):
            h = mats @ (z * m_on).astype(np.float64)
            z = np.stack([block_argmax(h[:, j], c.l, m_on[:, j]) for j in range(k)], axis=1)
        for _ in range(off_steps):
            z = rnn_step(mats, z, None, c.l)
        if record:
            for j, idx in enumerate(decode_state(c, z)):
                traces[j].append(c.states[idx])
    finals = decode_state(c, z)
    return [WalkResult(c.states[finals[j]], dfa_walk(d, words[j]), traces[j]) for j in range(k)]


def run_walk(w, c: EmbeddingCodebook, d: Dfa, word, on_steps: int = 10, off_steps: int = 10) -> WalkResult:
    word = d.resolve_word(word)
    if not word:
        idx = decode_state(c, c.q[c.state_index(d.initial)])
        return WalkResult(c.states[int(idx)], d.initial, [])
    return run_walks(w, c, d, [word], on_steps, off_steps, record=True)[0]


# -- capacity -----------------------------------------------------------------

def block_length_for(n: int, l0: int = L0, n0: int = N0) -> int:
    """Divisor of N closest to L0 (N/N0) (log N0 / log N); ties go to the larger divisor."""
    target = l0 * (n / n0) * (math.log(n0) / math.log(n))
    divs = [d for d in range(1, n + 1) if n % d == 0]
    return min(divs, key=lambda d: (abs(d - target), -d))


def geometric_grid(lo: int, hi: int, ratio: float = 1.1) -> list[int]:
    out, x = [], float(lo)
    while x <= hi:
        v = int(round(x))
        if not out or v > out[-1]:
            out.append(v)
        x *= ratio
    return out


@dataclass
class TrialRecord:
    n: int
    l: int
    p: int
    weight_mode: str
    trial: int
    seed: int
    success: bool


def run_capacity_trial(n: int, p: int, weight_mode: str, seed: int, words: int = 5,
                       word_len: int = 5, on_steps: int = 10, off_steps: int = 10) -> bool:
    """One codebook instantiation; succeeds when every random word decodes correctly."""
    l = block_length_for(n)
    rng = np.random.default_rng(seed)
    d = gen_moddiv_dfa(p)
    c = make_codebook(d, n, l, rng)
    w = build_weights(d, c)
    if weight_mode == "binary":
        w = binarize_stochastic(w, 2.0, rng)
    elif weight_mode != "ideal":
        raise ValueError(f"weight_mode must be 'ideal' or 'binary', not {weight_mode!r}")
    ws = [[d.inputs[i] for i in rng.integers(0, len(d.inputs), word_len)] for _ in range(words)]
    return all(r.success for r in run_walks(w, c, d, ws, on_steps, off_steps))


def _cell_seed(base: int, n: int, p: int, mode: str, trial: int) -> int:
    return int(np.random.SeedSequence([base, n, p, 0 if mode == "ideal" else 1, trial]).generate_state(1)[0])


def capacity_sweep(n_list, p_list, trials: int, weight_mode: str, seed: int = 0,
                   **kw) -> list[TrialRecord]:
    """Success of every (N, P, trial) cell; rows sorted by (n, p, trial)."""
    rows = []
    for n in n_list:
        l = block_length_for(n)
        for p in p_list:
            for t in range(trials):
                s = _cell_seed(seed, n, p, weight_mode, t)
                rows.append(TrialRecord(n, l, p, weight_mode, t, s, run_capacity_trial(n, p, weight_mode, s, **kw)))
    rows.sort(key=lambda r: (r.n, r.p, r.trial))
    return rows


def success_rate(rows: Sequence[TrialRecord], n: int, p: int, mode: str) -> float:
    sel = [r.success for r in rows if r.n == n and r.p == p and r.weight_mode == mode]
    return float(np.mean(sel)) if sel else float("nan")


def p_max_from_rows(rows: Sequence[TrialRecord], n: int, mode: str, threshold: float = 0.9,
                    min_trials: int = 10) -> int:
    """Largest tested P whose success rate is at least ``threshold`` (0 if none)."""
    best = 0
    for p in sorted({r.p for r in rows if r.n == n and r.weight_mode == mode}):
        sel = [r.success for r in rows if r.n == n and r.p == p and r.weight_mode == mode]
        if len(sel) >= min_trials and np.mean(sel) >= threshold:
            best = max(best, p)
    return best


def search_p_max(n: int, weight_mode: str, grid: Sequence[int], trials: int = 10, seed: int = 0,
                 threshold: float = 0.9, **kw) -> tuple[int, list[TrialRecord]]:
    """Bisection over a sorted P grid, assuming success falls monotonically with P.

    Every evaluated cell is returned so the table can still be written out.
    """
    l = block_length_for(n)
    rows: list[TrialRecord] = []

    def ok(p: int) -> bool:
        recs = []
        for t in range(trials):
            s = _cell_seed(seed, n, p, weight_mode, t)
            recs.append(TrialRecord(n, l, p, weight_mode, t, s, run_capacity_trial(n, p, weight_mode, s, **kw)))
        rows.extend(recs)
        return np.mean([r.success for r in recs]) >= threshold

    lo, hi = -1, len(grid)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(grid[mid]):
            lo = mid
        else:
            hi = mid
    rows.sort(key=lambda r: (r.n, r.p, r.trial))
    return (grid[lo] if lo >= 0 else 0), rows


@dataclass
class ScalingFit:
    slope: float
    intercept: float
    r2: float


def fit_scaling(ns: Sequence[int], p_max: Sequence[float]) -> ScalingFit:
    """Linear regression of P_max on N^2 / (log N)^2."""
    x = np.array([n * n / math.log(n) ** 2 for n in ns])
    res = stats.linregress(x, np.asarray(p_max, dtype=float))
    return ScalingFit(float(res.slope), float(res.intercept), float(res.rvalue ** 2))


def write_sweep_csv(rows: Sequence[TrialRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["n", "l", "p", "weight_mode", "trial", "seed", "success"])
        for r in sorted(rows, key=lambda r: (r.n, r.weight_mode, r.p, r.trial)):
            wr.writerow([r.n, r.l, r.p, r.weight_mode, r.trial, r.seed, int(r.success)])


def write_summary_csv(summary: dict[int, tuple[int, int]], path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["n", "p_max_ideal", "p_max_binary", "ratio"])
        for n in sorted(summary):
            pi, pb = summary[n]
            wr.writerow([n, pi, pb, f"{pi / pb:.6g}" if pb else "inf"])
