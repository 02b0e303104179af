"""Spiking block-WTA network of LIF neurons with alpha-shaped synaptic currents.

Units: ms, mV, C = 1 so currents are in mV/ms.  A presynaptic spike through
weight w adds w_scale * w / tau_syn to the second synaptic stage J, so the
charge it delivers is w_scale * w.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import kernels
from .compiler import EmbeddingCodebook, WeightMatrix
from .dfa import Dfa, dfa_trace


@dataclass(frozen=True)
class SimParams:
    n: int = 2048
    l: int = 8
    dt: float = 0.05
    tau_m: float = 20.0
    u_theta: float = 20.0
    u_rest: float = 25.0
    u_reset: float = 0.0
    c_mem: float = 1.0
    tau_syn: float = 20.0
    tau_ref: float = 10.0
    tau_readout: float = 10.0
    w_scale: float = 0.1

    def __post_init__(self):
        for name in ("dt", "tau_m", "c_mem", "tau_syn", "tau_ref", "tau_readout"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.dt > 0.1 * self.tau_syn:
            raise ValueError("dt must be much smaller than tau_syn")
        if self.n % self.l:
            raise ValueError("l must divide n")

    @property
    def ref_steps(self) -> int:
        return int(round(self.tau_ref / self.dt))

    def steps(self, ms: float) -> int:
        return int(round(ms / self.dt))


def calibrate_w_scale(w, target: float = 0.1) -> float:
    """Scale that makes the mean absolute charge per spike equal ``target``."""
    mat = w.w if isinstance(w, WeightMatrix) else np.asarray(w)
    mean_abs = float(np.abs(mat).mean())
    if mean_abs == 0:
        raise ValueError("all-zero weight matrix")
    return target / mean_abs


@dataclass
class NeuronArray:
    u: np.ndarray
    i_syn: np.ndarray
    j_syn: np.ndarray
    ref: np.ndarray  # remaining refractory steps
    masked: np.ndarray

    @classmethod
    def resting(cls, n: int, u0=None) -> NeuronArray:
        u = np.zeros(n) if u0 is None else np.array(u0, dtype=np.float64)
        return cls(u, np.zeros(n), np.zeros(n), np.zeros(n, dtype=np.int32), np.zeros(n, dtype=bool))

    def copy(self) -> NeuronArray:
        return NeuronArray(self.u.copy(), self.i_syn.copy(), self.j_syn.copy(), self.ref.copy(), self.masked.copy())

    def check_finite(self, t_ms: float) -> None:
        for name in ("u", "i_syn", "j_syn"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)):
                bad = int(np.flatnonzero(~np.isfinite(arr))[0])
                raise FloatingPointError(f"non-finite {name} at neuron {bad}, t={t_ms:.3f} ms")


def _advance(p: SimParams, nr: NeuronArray, wt: np.ndarray, mask: np.ndarray, ext: np.ndarray,
             n_steps: int, drive=None, backend: str | None = None):
    sim = kernels.get_simulate(backend) if drive is None else kernels.get_simulate("python")
    nr.masked = mask == 0
    return sim(nr.u, nr.i_syn, nr.j_syn, nr.ref, wt, mask, ext, n_steps, p.dt, p.tau_m, p.u_rest,
               p.u_theta, p.u_reset, p.c_mem, p.tau_syn, p.w_scale / p.tau_syn, p.ref_steps, p.l, drive)


def snn_step(p: SimParams, nr: NeuronArray, w, mask=None, ext=None, backend: str | None = None) -> np.ndarray:
    """One Euler step in place; returns the indices of neurons that spiked."""
    mat = w.w if isinstance(w, WeightMatrix) else np.asarray(w)
    wt = np.ascontiguousarray(mat.T, dtype=np.float64)
    mask = np.ones(p.n, dtype=np.int8) if mask is None else np.asarray(mask, dtype=np.int8)
    ext = np.zeros(p.n) if ext is None else np.asarray(ext, dtype=np.float64)
    _, nid = _advance(p, nr, wt, mask, ext, 1, backend=backend)
    nr.check_finite(0.0)
    return nid


def wta_enforce(p: SimParams, nr: NeuronArray, spikes: Sequence[int]) -> None:
    """Reset and silence every block that contains a spike."""
    for s in spikes:
        b0 = (int(s) // p.l) * p.l
        nr.u[b0:b0 + p.l] = p.u_reset
        nr.ref[b0:b0 + p.l] = p.ref_steps


# -- schedules ----------------------------------------------------------------

@dataclass
class SpikeSchedule:
    """Input segments in ms; symbol None means no input (a gap)."""

    segments: list[tuple[str | None, float]]

    def __post_init__(self):
        for _, ms in self.segments:
            if not ms > 0:
                raise ValueError("segment durations must be positive")

    @property
    def duration(self) -> float:
        return float(sum(ms for _, ms in self.segments))

    def bounds(self) -> list[tuple[str | None, float, float]]:
        out, t = [], 0.0
        for s, ms in self.segments:
            out.append((s, t, t + ms))
            t += ms
        return out


def word_schedule(word: Sequence[str], on_ms: float = 200.0, off_ms: float = 200.0,
                  settle_ms: float = 400.0) -> SpikeSchedule:
    segs: list[tuple[str | None, float]] = [(None, settle_ms)]
    for s in word:
        segs += [(s, on_ms), (None, off_ms)]
    return SpikeSchedule(segs)


def random_timing_schedule(word: Sequence[str], rng: np.random.Generator, lo: float = 200.0,
                           hi: float = 1000.0, settle_ms: float = 400.0) -> SpikeSchedule:
    segs: list[tuple[str | None, float]] = [(None, settle_ms)]
    for s in word:
        segs += [(s, float(rng.uniform(lo, hi))), (None, float(rng.uniform(lo, hi)))]
    return SpikeSchedule(segs)


# -- simulation ---------------------------------------------------------------

@dataclass
class SpikeTrace:
    times: np.ndarray  # ms
    neurons: np.ndarray
    duration: float
    schedule: SpikeSchedule
    n: int

    def __post_init__(self):
        if self.times.size and np.any(np.diff(self.times) < 0):
            raise ValueError("spike events must be time-ordered")


@dataclass(frozen=True)
class KickParams:
    """Initial condition: strong external current into the initial state's neurons."""

    current: float = 5.0
    duration: float | None = None  # default 2 tau_syn


def run_snn(p: SimParams, w, c: EmbeddingCodebook, d: Dfa, schedule: SpikeSchedule,
            rng: np.random.Generator, kick: KickParams = KickParams(), backend: str | None = None,
            drive=None) -> SpikeTrace:
    """Simulate the full schedule starting from the initial state's attractor.

    ``drive(spikes) -> currents`` swaps the in-memory weights for an external
    read-out (used by the crossbar loop, which always runs the numpy kernel).
    """
    mat = w.w if isinstance(w, WeightMatrix) else np.asarray(w)
    if mat.shape != (p.n, p.n) or c.n != p.n or c.l != p.l:
        raise ValueError("weights, codebook and parameters disagree on n or l")
    wt = np.ascontiguousarray(mat.T, dtype=np.float64)
    nr = NeuronArray.resting(p.n, rng.uniform(p.u_reset, p.u_theta, p.n))

    kick_ms = 2 * p.tau_syn if kick.duration is None else kick.duration
    kick_ext = np.where(c.q[c.state_index(d.initial)] != 0, kick.current, 0.0)
    zero_ext = np.zeros(p.n)
    masks = {s: c.mask_for(s) for s in d.inputs}
    full = np.ones(p.n, dtype=np.int8)

    # split the schedule further at the end of the kick
    pieces: list[tuple[np.ndarray, np.ndarray, int]] = []
    step = 0
    kick_end = p.steps(kick_ms)
    for s, t0, t1 in schedule.bounds():
        a, b = p.steps(t0), p.steps(t1)
        mk = full if s is None else masks[s]
        if a < kick_end < b:
            pieces += [(mk, kick_ext, kick_end - a), (mk, zero_ext, b - kick_end)]
        else:
            pieces.append((mk, kick_ext if b <= kick_end else zero_ext, b - a))

    all_s, all_n = [], []
    for mk, ext, k in pieces:
        if k <= 0:
            continue
        ss, nn = _advance(p, nr, wt, mk, ext, k, drive, backend)
        nr.check_finite((step + k) * p.dt)
        all_s.append(ss + step)
        all_n.append(nn)
        step += k
    steps = np.concatenate(all_s) if all_s else np.zeros(0, dtype=np.int64)
    neurons = np.concatenate(all_n) if all_n else np.zeros(0, dtype=np.int64)
    return SpikeTrace(steps * p.dt, neurons, step * p.dt, schedule, p.n)


# -- readout ------------------------------------------------------------------

def alpha_kernel(tau: float, dt: float, length: float | None = None) -> np.ndarray:
    """Causal alpha kernel t/tau^2 exp(-t/tau), sampled at dt, unit area."""
    length = 10 * tau if length is None else length
    t = np.arange(0.0, length, dt)
    k = t / tau ** 2 * np.exp(-t / tau)
    return k / (k.sum() * dt)


@dataclass
class Rates:
    t: np.ndarray  # ms, bin starts
    names: list[str]  # q states then b states
    m: np.ndarray  # (len(names), T), spikes/ms
    nu: np.ndarray  # mean rate per block, spikes/ms

    def row(self, name: str) -> np.ndarray:
        return self.m[self.names.index(name)]


def readout_rates(trace: SpikeTrace, c: EmbeddingCodebook, tau_readout: float = 10.0,
                  dt_out: float = 1.0) -> Rates:
    """m_q(t) = (1/M) sum_i q_i (K * spikes_i)(t) for every q and b vector."""
    nbins = max(1, int(math.ceil(trace.duration / dt_out - 1e-9)))
    bins = np.minimum((trace.times / dt_out).astype(np.int64), nbins - 1)
    vecs = np.concatenate([c.q, c.b]).astype(np.float64)
    proj = np.zeros((vecs.shape[0], nbins))
    total = np.zeros(nbins)
    if trace.times.size:
        np.add.at(proj.T, bins, vecs[:, trace.neurons].T)
        np.add.at(total, bins, 1.0)
    k = alpha_kernel(tau_readout, dt_out) * dt_out
    m_count = c.m
    filt = np.stack([np.convolve(row, k)[:nbins] for row in proj]) / (m_count * dt_out)
    nu = np.convolve(total, k)[:nbins] / (m_count * dt_out)
    names = [f"{q}" for q in c.states] + [f"b:{q}" for q in c.states]
    return Rates(np.arange(nbins) * dt_out, names, filt, nu)


@dataclass
class DecodedWalk:
    entries: list[dict]  # {"state", "t_enter_ms"}
    gap_states: list[str | None]  # state at the end of each gap
    final: str | None

    def matches(self, d: Dfa, word) -> bool:
        return self.gap_states == dfa_trace(d, word)


def decode_walk(rates: Rates, c: EmbeddingCodebook, schedule: SpikeSchedule,
                threshold: float = 0.5) -> DecodedWalk:
    """Read the inhabited state off the rates during input-free gaps.

    A state counts as inhabited when its rate exceeds ``threshold`` times the
    mean block rate; the strongest such state wins.
    """
    nq = len(c.states)
    mq = rates.m[:nq]
    entries: list[dict] = []
    gaps: list[str | None] = []
    last = None
    for s, t0, t1 in schedule.bounds():
        if s is not None:
            continue
        sel = np.flatnonzero((rates.t >= t0) & (rates.t < t1))
        cur = None
        for j in sel:
            col = mq[:, j]
            best = int(np.argmax(col))
            cur = c.states[best] if col[best] > threshold * rates.nu[j] and rates.nu[j] > 0 else None
            if cur is not None and cur != last:
                entries.append({"state": cur, "t_enter_ms": float(rates.t[j])})
                last = cur
        gaps.append(cur)
    return DecodedWalk(entries, gaps, gaps[-1] if gaps else None)


# -- output files -------------------------------------------------------------

def write_spikes_csv(trace: SpikeTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t_ms", "neuron"])
        for t, n in zip(trace.times, trace.neurons):
            wr.writerow([f"{t:.4f}", int(n)])


def write_rates_csv(rates: Rates, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t_ms"] + rates.names)
        for j, t in enumerate(rates.t):
            wr.writerow([f"{t:.4f}"] + [f"{v:.6g}" for v in rates.m[:, j]])


def write_walk_json(walk: DecodedWalk, path) -> None:
    with open(path, "w") as fh:
        json.dump(walk.entries, fh, indent=1)
