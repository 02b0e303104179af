"""1T1R crossbar emulation for the 64-neuron closed-loop network.

The logical 64x64 matrix is stored on a 32x128 device grid.  Word lines
(device rows) carry presynaptic spikes and bit lines (device columns) collect
postsynaptic currents, so the stored logical matrix is G[pre, post] = W[post, pre].
G[0:32, :] goes to columns 0-63 and G[32:64, :] to columns 64-127.  Every read
applies the two 32-neuron halves one after the other and sums the currents.
Conductances are in units of the top ternary level.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .compiler import EmbeddingCodebook, WeightMatrix
from .dfa import Dfa
from .snn import SimParams, SpikeSchedule, SpikeTrace, run_snn

ROWS, COLS, N_LOGICAL = 32, 128, 64
FAULT_LEVEL = {"stuck_low": 0.0, "stuck_high": 2.0}


@dataclass
class CrossbarNoise:
    programming_cv: float = 0.1
    read_std: float = 0.05
    relaxation_cv: float = 0.05

    @classmethod
    def zero(cls) -> CrossbarNoise:
        return cls(0.0, 0.0, 0.0)


@dataclass
class Fault:
    """Fault at logical weight W[row, col] (row = postsynaptic neuron); col=None marks the whole row."""

    row: int
    col: int | None
    kind: str

    def __post_init__(self):
        if self.kind not in FAULT_LEVEL:
            raise ValueError(f"fault kind must be one of {sorted(FAULT_LEVEL)}")
        if not 0 <= self.row < N_LOGICAL or (self.col is not None and not 0 <= self.col < N_LOGICAL):
            raise ValueError("fault coordinates out of range")


def logical_to_device(pre, post):
    """Device (row, column) holding the weight from ``pre`` onto ``post``."""
    pre, post = np.asarray(pre), np.asarray(post)
    return pre % ROWS, post + N_LOGICAL * (pre // ROWS)


@dataclass
class CrossbarState:
    g: np.ndarray = field(default_factory=lambda: np.zeros((ROWS, COLS)))
    g_target: np.ndarray = field(default_factory=lambda: np.zeros((ROWS, COLS)))
    fault_map: np.ndarray = field(default_factory=lambda: np.zeros((ROWS, COLS), dtype="<U10"))
    noise: CrossbarNoise = field(default_factory=CrossbarNoise)
    faults: list[Fault] = field(default_factory=list)

    def __post_init__(self):
        if not np.any(self.fault_map != ""):
            self.fault_map = np.full((ROWS, COLS), "ok", dtype="<U10")
        for f in self.faults:
            cols = range(N_LOGICAL) if f.col is None else [f.col]
            for pre in cols:
                r, cidx = logical_to_device(pre, f.row)
                self.fault_map[r, cidx] = f.kind

    def logical(self) -> np.ndarray:
        """Device conductances rearranged into the logical G[pre, post] layout."""
        return np.concatenate([self.g[:, :N_LOGICAL], self.g[:, N_LOGICAL:]], axis=0)

    def top_level_mean(self) -> float:
        ok = (self.fault_map == "ok") & (self.g_target == 1.0)
        return float(self.g[ok].mean()) if ok.any() else 1.0


def program(xbar: CrossbarState, w: WeightMatrix, rng: np.random.Generator) -> CrossbarState:
    """Write ternary weights; non-faulty devices get level (1 + e_prog)(1 + e_relax)."""
    if w.provenance != "ternary":
        raise ValueError("crossbar programming expects ternary weights")
    if w.w.shape != (N_LOGICAL, N_LOGICAL):
        raise ValueError(f"crossbar holds a {N_LOGICAL}x{N_LOGICAL} matrix, got {w.w.shape}")
    glog = w.w.T
    target = np.concatenate([glog[:ROWS], glog[ROWS:]], axis=1)
    nz = xbar.noise
    e_prog = rng.normal(0.0, nz.programming_cv, target.shape) if nz.programming_cv > 0 else 0.0
    e_rel = rng.normal(0.0, nz.relaxation_cv, target.shape) if nz.relaxation_cv > 0 else 0.0
    g = np.maximum(target * (1.0 + e_prog) * (1.0 + e_rel), 0.0)
    for kind, level in FAULT_LEVEL.items():
        g[xbar.fault_map == kind] = level
    xbar.g, xbar.g_target = g, target.copy()
    return xbar


@dataclass
class ReadResult:
    currents: np.ndarray
    noise: np.ndarray


def read_mvm(xbar: CrossbarState, spikes, rng: np.random.Generator | None = None) -> ReadResult:
    """Two half reads (neurons 0-31 on columns 0-63, neurons 32-63 on columns 64-127), summed."""
    v = np.asarray(spikes, dtype=np.float64)
    std = xbar.noise.read_std
    parts, noises = [], []
    for h in range(2):
        cur = xbar.g[:, h * N_LOGICAL:(h + 1) * N_LOGICAL].T @ v[h * ROWS:(h + 1) * ROWS]
        nse = rng.normal(0.0, std, N_LOGICAL) if std > 0 and rng is not None else np.zeros(N_LOGICAL)
        parts.append(cur + nse)
        noises.append(nse)
    return ReadResult(parts[0] + parts[1], noises[0] + noises[1])


def current_scale(xbar: CrossbarState, w_scale: float) -> float:
    return w_scale / xbar.top_level_mean()


def run_closed_loop(p: SimParams, xbar: CrossbarState, c: EmbeddingCodebook, d: Dfa,
                    schedule: SpikeSchedule, rng: np.random.Generator, read_rng=None,
                    dump: list | None = None, **kw) -> SpikeTrace:
    """SNN loop where every step with spikes reads the crossbar for the recurrent drive.

    The currents are divided by the mean top-level conductance so one device
    at the top level carries the same charge as a unit in-memory weight.
    """
    if p.n != N_LOGICAL:
        raise ValueError("closed loop runs a 64-neuron network")
    read_rng = read_rng if read_rng is not None else rng
    gain = current_scale(xbar, p.w_scale) / p.w_scale
    spike_vec = np.zeros(N_LOGICAL)

    def drive(spikes):
        spike_vec[:] = 0.0
        spike_vec[spikes] = 1.0
        res = read_mvm(xbar, spike_vec, read_rng)
        if dump is not None:
            dump.append(res.currents.copy())
        return res.currents * gain if gain != 1.0 else res.currents

    dummy = np.zeros((p.n, p.n))
    return run_snn(p, dummy, c, d, schedule, rng, drive=drive, **kw)


# -- config & dumps -----------------------------------------------------------

def load_crossbar_config(obj) -> CrossbarState:
    """Build an unprogrammed crossbar from the JSON config (dict or text)."""
    cfg = json.loads(obj) if isinstance(obj, str) else dict(obj)
    allowed = {"rows", "cols", "programming_cv", "read_std", "relaxation_cv", "faults"}
    extra = set(cfg) - allowed
    if extra:
        raise ValueError(f"unknown crossbar config keys: {sorted(extra)}")
    if cfg.get("rows", ROWS) != ROWS or cfg.get("cols", COLS) != COLS:
        raise ValueError(f"only a {ROWS}x{COLS} device grid is supported")
    noise = CrossbarNoise(float(cfg.get("programming_cv", 0.1)), float(cfg.get("read_std", 0.05)),
                          float(cfg.get("relaxation_cv", 0.05)))
    faults = []
    for f in cfg.get("faults", []):
        col = f.get("col", "*")
        faults.append(Fault(int(f["row"]), None if col == "*" else int(col), f["kind"]))
    return CrossbarState(noise=noise, faults=faults)


def write_readout_csv(times, reads, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t_ms", "line", "current"])
        for t, cur in zip(times, reads):
            for line, val in enumerate(cur):
                wr.writerow([f"{t:.4f}", line, f"{val:.6g}"])
