"""Reusable experiment pipelines shared by the CLI and the test suite."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .compiler import (EmbeddingCodebook, WeightMatrix, add_weight_noise, binarize_stochastic,
                       build_weights, make_codebook, predict_h_stats, quantize_fixed_point,
                       quantize_ternary, zero_intra_block)
from .config import SeedStreams
from .crossbar import CrossbarState, load_crossbar_config, program, run_closed_loop
from .dfa import Dfa, counter_dfa, dfa_trace, gen_moddiv_dfa, parse_dfa_spec, two_input_dfa
from .regex import regex_to_dfa
from .rnn import async_block_update, run_walks
from .snn import (DecodedWalk, KickParams, SimParams, SpikeTrace, calibrate_w_scale, decode_walk,
                  random_timing_schedule, readout_rates, run_snn, word_schedule)
from .vsa import gen_sbc, hoeffding_exceedance_bound


class InvariantViolation(RuntimeError):
    """A run detected a state its contracts rule out."""


# -- building blocks -----------------------------------------------------------

def resolve_dfa(spec: str) -> Dfa:
    """'moddiv:<p>', 'counter', 'two-input', 'regex:<pattern>' or 'file:<path>' (or a bare path)."""
    if spec.startswith("moddiv:"):
        return gen_moddiv_dfa(int(spec.split(":", 1)[1]))
    if spec == "counter":
        return counter_dfa()
    if spec == "two-input":
        return two_input_dfa()
    if spec.startswith("regex:"):
        return regex_to_dfa(spec.split(":", 1)[1], alphabet=["0", "1"])
    path = spec.split(":", 1)[1] if spec.startswith("file:") else spec
    if not Path(path).exists():
        raise ValueError(f"unknown DFA {spec!r}")
    return parse_dfa_spec(Path(path).read_text())


def apply_transforms(w: WeightMatrix, t: dict | None, rng: np.random.Generator) -> WeightMatrix:
    """Pipeline order: binarize, noise, ternary, fixed point (each optional)."""
    t = t or {}
    if t.get("binarize") is not None:
        w = binarize_stochastic(w, float(t["binarize"]), rng)
    if t.get("noise") is not None:
        w = add_weight_noise(w, float(t["noise"]), rng)
    tern = t.get("ternary")
    if tern is not None:
        w = quantize_ternary(w) if tern == "default" else quantize_ternary(w, float(tern[0]), float(tern[1]))
    if t.get("fixed_point"):
        w = quantize_fixed_point(w)
    return w


def make_network(d: Dfa, n: int, l: int, streams: SeedStreams, transform: dict | None = None,
                 mode: str = "random", bridge_inputs: str = "all") -> tuple[EmbeddingCodebook, WeightMatrix]:
    c = make_codebook(d, n, l, streams.rng("codebook"), mode)
    w = apply_transforms(build_weights(d, c, bridge_inputs=bridge_inputs), transform, streams.rng("weights"))
    return c, w


def random_words(d: Dfa, count: int, max_len: int, rng: np.random.Generator) -> list[list[str]]:
    out = []
    for _ in range(count):
        k = int(rng.integers(1, max_len + 1))
        out.append([d.inputs[i] for i in rng.integers(0, len(d.inputs), k)])
    return out


def audit_block_sparsity(trace: SpikeTrace, l: int, tau_ref: float, dt: float) -> None:
    """No two spikes in one block closer than the refractory period."""
    if trace.times.size == 0:
        return
    blocks = trace.neurons // l
    order = np.lexsort((trace.times, blocks))
    b, t = blocks[order], trace.times[order]
    same = b[1:] == b[:-1]
    gaps = np.diff(t)[same]
    if gaps.size and gaps.min() < tau_ref - 0.5 * dt:
        raise InvariantViolation(f"two spikes in one block {gaps.min():.3f} ms apart")


# -- spiking walks -------------------------------------------------------------

@dataclass
class SnnWalk:
    word: list[str]
    expected: list[str]
    decoded: DecodedWalk
    trace: SpikeTrace
    rates: object = None

    @property
    def success(self) -> bool:
        return self.decoded.gap_states == self.expected


def snn_walk(p: SimParams, w, c: EmbeddingCodebook, d: Dfa, word, rng: np.random.Generator,
             timing: str = "regular", on_ms: float = 200.0, off_ms: float = 200.0, settle_ms: float = 400.0,
             lo_ms: float = 200.0, hi_ms: float = 1000.0, kick: KickParams = KickParams(),
             threshold: float = 0.5, backend: str | None = None, sched_rng: np.random.Generator | None = None,
             xbar: CrossbarState | None = None, dump: list | None = None) -> SnnWalk:
    word = d.resolve_word(word)
    if timing == "regular":
        sched = word_schedule(word, on_ms, off_ms, settle_ms)
    else:
        sched = random_timing_schedule(word, sched_rng if sched_rng is not None else rng, lo_ms, hi_ms, settle_ms)
    if xbar is None:
        tr = run_snn(p, w, c, d, sched, rng, kick=kick, backend=backend)
    else:
        tr = run_closed_loop(p, xbar, c, d, sched, rng, dump=dump, kick=kick)
    audit_block_sparsity(tr, p.l, p.tau_ref, p.dt)
    rates = readout_rates(tr, c, p.tau_readout)
    dec = decode_walk(rates, c, sched, threshold)
    return SnnWalk(list(word), dfa_trace(d, word), dec, tr, rates)


def golden_network(seed: int, transform: dict | None = None, n: int = 2048, l: int = 8):
    """moddiv-23 with noisy 1-bit weights (or ``transform``) and its simulation parameters."""
    d = gen_moddiv_dfa(23)
    t = {"binarize": 2.0, "noise": 0.5} if transform is None else transform
    streams = SeedStreams(seed)
    c, w = make_network(d, n, l, streams, t)
    p = SimParams(n=n, l=l, w_scale=calibrate_w_scale(w, 0.1))
    return d, c, w, p, streams


# -- crossbar ------------------------------------------------------------------

CROSSBAR_DEFAULT = {"programming_cv": 0.1, "read_std": 0.05, "relaxation_cv": 0.05,
                    "faults": [{"row": 5, "col": "*", "kind": "stuck_low"}]}


def crossbar_network(d: Dfa, streams: SeedStreams, xcfg: dict | None = None, w_scale_target: float = 4.0,
                     ternary="default", intra_block_low: bool = True, bridge_inputs: str = "incoming"):
    """Orthogonal 64-neuron codebook, f = 0 weights, ternary levels, programmed crossbar."""
    c = make_codebook(d, 64, 8, streams.rng("codebook"), mode="orthogonal")
    wi = build_weights(d, c, bridge_inputs=bridge_inputs)
    if ternary == "default":
        w = quantize_ternary(wi, intra_block_low=intra_block_low)
    else:
        w = quantize_ternary(wi, float(ternary[0]), float(ternary[1]), intra_block_low=intra_block_low)
    p = SimParams(n=64, l=8, w_scale=calibrate_w_scale(w, w_scale_target))
    xbar = load_crossbar_config(CROSSBAR_DEFAULT if xcfg is None else xcfg)
    program(xbar, w, streams.rng("noise"))
    return c, w, p, xbar


# -- statistics checks -----------------------------------------------------------

@dataclass
class SnrResult:
    condition: str
    separation: float
    predicted_separation: float
    std: float
    predicted_std: float

    @property
    def sep_error(self) -> float:
        return self.separation / self.predicted_separation - 1.0

    @property
    def std_error(self) -> float:
        return self.std / self.predicted_std - 1.0


def snr_monte_carlo(d: Dfa, n: int, l: int, draws: int, state: str, symbol: str, streams: SeedStreams,
                    bridge_inputs: str = "all") -> list[SnrResult]:
    """Postsynaptic sums over independent codebooks, compared with the closed forms.

    Unmasked: h = W q at ``state``; target = q.  Masked: h = W (q AND s) for
    ``symbol``; target = bridge vector of the successor state.
    """
    nxt = d.step(state, symbol)
    acc = {"at_state": ([], []), "at_state_masked": ([], [])}
    pred = {}
    for k in range(draws):
        c = make_codebook(d, n, l, streams.child(k).rng("codebook"))
        w = build_weights(d, c, bridge_inputs=bridge_inputs).w
        q = c.q[c.state_index(state)]
        tgt = q.astype(bool)
        h = w @ q.astype(np.float64)
        acc["at_state"][0].append(h[tgt])
        acc["at_state"][1].append(h[~tgt])
        mk = c.mask_for(symbol)
        tgt = c.b[c.state_index(nxt)].astype(bool)
        h = w @ (q * mk).astype(np.float64)
        acc["at_state_masked"][0].append(h[tgt])
        acc["at_state_masked"][1].append(h[~tgt])
        if not pred:
            pred = {cond: predict_h_stats(d, c, cond, form="exact", bridge_inputs=bridge_inputs) for cond in acc}
    out = []
    for cond, (a, i) in acc.items():
        a, i = np.concatenate(a), np.concatenate(i)
        pooled = math.sqrt((((a - a.mean()) ** 2).sum() + ((i - i.mean()) ** 2).sum()) / (a.size + i.size))
        out.append(SnrResult(cond, float(a.mean() - i.mean()), pred[cond].signal, pooled, pred[cond].std))
    return out


@dataclass
class EnergyResult:
    starts: int
    updates: int
    violations: int
    strict_decreases: int
    unconverged: int
    energies: list = field(default_factory=list)  # per-start trajectories (first few only)


def energy_descent_check(n: int, l: int, patterns: int, starts: int, rng: np.random.Generator,
                         max_sweeps: int = 200, keep: int = 5) -> EnergyResult:
    """Asynchronous single-block argmax updates on W_attr with the same-block couplings removed.

    The energy is tracked in exact integer arithmetic (L^2 W has integer entries).
    """
    q = np.stack([gen_sbc(n, l, rng).data for _ in range(patterns)]).astype(np.int64)
    qi = l * q - 1
    wint = zero_intra_block((qi.T @ qi).astype(np.float64), l).astype(np.int64)
    wf = wint.astype(np.float64)
    m = n // l
    upd = viol = dec = unconv = 0
    traj = []
    for s in range(starts):
        z = gen_sbc(n, l, rng).data.astype(np.int8)
        e = -int(z.astype(np.int64) @ wint @ z.astype(np.int64))
        hist = [e]
        converged = False
        for _ in range(max_sweeps):
            changed = False
            for b in rng.permutation(m):
                nz = async_block_update(wf, z, int(b), l)
                if np.array_equal(nz, z):
                    continue
                ne = -int(nz.astype(np.int64) @ wint @ nz.astype(np.int64))
                upd += 1
                if ne > e:
                    viol += 1
                elif ne < e:
                    dec += 1
                z, e, changed = nz, ne, True
                hist.append(e)
            if not changed:
                converged = True
                break
        unconv += not converged
        if s < keep:
            traj.append([x / (l * l) for x in hist])
    return EnergyResult(starts, upd, viol, dec, unconv, traj)


def hoeffding_check(n: int, l: int, theta: float, pairs: int, rng: np.random.Generator,
                    chunk: int = 10000) -> tuple[float, float]:
    """Empirical P[similarity > f + theta] over independent SBC pairs, and the bound."""
    m = n // l
    hits = 0
    done = 0
    while done < pairs:
        k = min(chunk, pairs - done)
        a = rng.integers(0, l, (k, m))
        b = rng.integers(0, l, (k, m))
        sim = (a == b).mean(axis=1)
        hits += int((sim > 1.0 / l + theta).sum())
        done += k
    return hits / pairs, hoeffding_exceedance_bound(m, theta)


# -- regex frontend --------------------------------------------------------------

def random_regex(rng: np.random.Generator, alphabet: Sequence[str] = ("0", "1"), depth: int = 3) -> str:
    """Random pattern using literals, concatenation, |, *, + and ?."""
    def gen(dp: int) -> str:
        r = rng.random()
        if dp == 0 or r < 0.25:
            return str(alphabet[int(rng.integers(len(alphabet)))])
        if r < 0.55:
            return gen(dp - 1) + gen(dp - 1)
        if r < 0.75:
            return "(" + gen(dp - 1) + "|" + gen(dp - 1) + ")"
        op = "*+?"[int(rng.integers(3))]
        return "(" + gen(dp - 1) + ")" + op
    return gen(depth)


def all_strings(alphabet: Sequence[str], max_len: int):
    yield ""
    frontier = [""]
    for _ in range(max_len):
        frontier = [s + a for s in frontier for a in alphabet]
        yield from frontier


@dataclass
class RegexCheck:
    pattern: str
    states: int
    strings: int
    mismatches: list


def regex_oracle_check(pattern: str, alphabet: Sequence[str] = ("0", "1"), max_len: int = 8) -> RegexCheck:
    """Compare DFA acceptance with Python's ``re.fullmatch`` on every string up to ``max_len``."""
    d = regex_to_dfa(pattern, alphabet)
    rx = re.compile(pattern)
    bad = []
    count = 0
    for s in all_strings(alphabet, max_len):
        count += 1
        if d.accepts(list(s)) != (rx.fullmatch(s) is not None):
            bad.append(s)
    return RegexCheck(pattern, len(d.states), count, bad)


def regex_rnn_walks(pattern: str, n: int, l: int, streams: SeedStreams, words: int = 20, max_len: int = 8,
                    alphabet: Sequence[str] = ("0", "1")):
    """Compile a regex DFA into a network and walk random strings through the discrete engine."""
    d = regex_to_dfa(pattern, alphabet)
    c, w = make_network(d, n, l, streams)
    ws = random_words(d, words, max_len, streams.rng("schedule"))
    res = run_walks(w, c, d, ws)
    return d, ws, res



