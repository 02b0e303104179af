"""Command-line entry point: ``fsma <subcommand> --config file.json [--seed k] [--out dir] [--bit-exact]``.

Exit codes: 0 success, 1 golden verification failed, 2 invalid configuration,
3 runtime failure or invariant violation (partial artifacts are flagged in the
manifest).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import kernels
from .analogy import ATOMS, EXPECTED, run_analogy, write_analogy_csv
from .compiler import WeightMatrix
from .config import ConfigError, SeedStreams
from .crossbar import write_readout_csv
from .dfa import DfaError, dfa_walk, gen_moddiv_dfa
from .golden import verify_golden
from .experiments import (InvariantViolation, crossbar_network, energy_descent_check, make_network,
                          random_regex, random_words, regex_oracle_check, regex_rnn_walks, resolve_dfa,
                          snn_walk, snr_monte_carlo)
from .regex import RegexError
from .rnn import (block_length_for, fit_scaling, geometric_grid, run_walks, search_p_max, write_summary_csv,
                  write_sweep_csv)
from .snn import KickParams, SimParams, calibrate_w_scale, write_rates_csv, write_spikes_csv, write_walk_json

log = logging.getLogger("fsma")

EXIT_OK, EXIT_GOLDEN, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def toolkit_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


# -- plots --------------------------------------------------------------------

def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def plot_raster(trace, path, title="") -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(8, 3.5))
    ax.plot(trace.times, trace.neurons, ",k")
    for s, t0, t1 in trace.schedule.bounds():
        if s is not None:
            ax.axvspan(t0, t1, color="tab:orange", alpha=0.12)
    ax.set_xlabel("t (ms)")
    ax.set_ylabel("neuron")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_rates(rates, path, title="") -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(8, 3.5))
    nq = len(rates.names) // 2
    nu = np.where(rates.nu > 0, rates.nu, np.nan)
    for k in range(nq):
        ax.plot(rates.t, rates.m[k] / nu, lw=0.8)
    for k in range(nq, 2 * nq):
        ax.plot(rates.t, rates.m[k] / nu, lw=0.6, ls="--", color="0.6")
    ax.set_xlabel("t (ms)")
    ax.set_ylabel("m / nu")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_capacity(summary, fit, path) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 4))
    for mode, marker in (("ideal", "o"), ("binary", "s")):
        pts = [(n * n / math.log(n) ** 2, v[mode]) for n, v in sorted(summary.items()) if mode in v]
        if pts:
            x, y = zip(*pts)
            ax.scatter(x, y, marker=marker, label=mode)
    for mode, f in fit.items():
        xs = np.linspace(0, max(n * n / math.log(n) ** 2 for n in summary), 50)
        ax.plot(xs, f.slope * xs + f.intercept, lw=0.8, label=f"{mode} fit (R2={f.r2:.3f})")
    ax.set_xlabel("N^2 / (log N)^2")
    ax.set_ylabel("P_max")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


# -- experiment runners -----------------------------------------------------------
# each returns (summary: flat dict of scalars, artifacts: list of file names)

def _words(cfg, d, streams):
    ws = [d.resolve_word(w) for w in cfg.get("words", [])]
    if cfg.get("random_words", 0):
        ws += random_words(d, cfg["random_words"], cfg["max_word_len"], streams.rng("schedule"))
    return ws


def run_walk_snn(cfg, out: Path):
    d = resolve_dfa(cfg["dfa"])
    streams = SeedStreams(cfg["seed"])
    c, w = make_network(d, cfg["n"], cfg["l"], streams, cfg["transform"], cfg["codebook"], cfg["bridge_inputs"])
    p = SimParams(n=cfg["n"], l=cfg["l"], dt=cfg["dt"], w_scale=calibrate_w_scale(w, cfg["w_scale_target"]))
    backend = None if cfg["backend"] == "auto" else cfg["backend"]
    ws = _words(cfg, d, streams)
    summary = {"backend": backend or kernels.BACKEND, "words": len(ws), "successes": 0}
    arts = []
    sim_rng, sched_rng = streams.rng("noise"), streams.rng("schedule")
    for k, word in enumerate(ws):
        r = snn_walk(p, w, c, d, word, sim_rng, timing=cfg["timing"], on_ms=cfg["on_ms"], off_ms=cfg["off_ms"],
                     settle_ms=cfg["settle_ms"], lo_ms=cfg["random_lo_ms"], hi_ms=cfg["random_hi_ms"],
                     kick=KickParams(cfg["kick_current"]), threshold=cfg["decode_threshold"], backend=backend,
                     sched_rng=sched_rng)
        tag = f"walk{k:02d}"
        write_spikes_csv(r.trace, out / f"{tag}_spikes.csv")
        write_rates_csv(r.rates, out / f"{tag}_rates.csv")
        write_walk_json(r.decoded, out / f"{tag}_walk.json")
        arts += [f"{tag}_spikes.csv", f"{tag}_rates.csv", f"{tag}_walk.json"]
        if cfg["plots"]:
            plot_raster(r.trace, out / f"{tag}_raster.png", " ".join(word))
            plot_rates(r.rates, out / f"{tag}_rates.png", " ".join(word))
            arts += [f"{tag}_raster.png", f"{tag}_rates.png"]
        summary[f"{tag}.word"] = " ".join(word)
        summary[f"{tag}.final"] = r.decoded.final
        summary[f"{tag}.expected"] = r.expected[-1]
        summary[f"{tag}.success"] = r.success
        summary["successes"] += int(r.success)
    return summary, arts


def run_walk_rnn(cfg, out: Path):
    d = resolve_dfa(cfg["dfa"])
    streams = SeedStreams(cfg["seed"])
    c, w = make_network(d, cfg["n"], cfg["l"], streams, cfg["transform"], cfg["codebook"], cfg["bridge_inputs"])
    ws = _words(cfg, d, streams)
    res = run_walks(w, c, d, ws, cfg["on_steps"], cfg["off_steps"], record=True)
    summary = {"words": len(ws), "successes": sum(r.success for r in res)}
    with open(out / "walks.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["word", "expected", "final", "success", "trace"])
        for k, (word, r) in enumerate(zip(ws, res)):
            wr.writerow([" ".join(word), r.expected, r.final, int(r.success), " ".join(r.trace)])
            summary[f"walk{k:02d}.final"] = r.final
            summary[f"walk{k:02d}.success"] = r.success
    return summary, ["walks.csv"]


def run_capacity(cfg, out: Path):
    grid = geometric_grid(cfg["grid_lo"], cfg["grid_hi"], cfg["grid_ratio"])
    rows, table = [], {}
    for n in cfg["n_list"]:
        table[n] = {}
        for mode in cfg["modes"]:
            pm, rr = search_p_max(n, mode, grid, cfg["trials"], cfg["seed"], cfg["threshold"],
                                  words=cfg["words"], word_len=cfg["word_len"])
            rows += rr
            table[n][mode] = pm
            log.info("N=%d %s: P_max=%d", n, mode, pm)
    write_sweep_csv(rows, out / "sweep.csv")
    arts = ["sweep.csv"]
    summary = {}
    fits = {}
    for mode in cfg["modes"]:
        if len(cfg["n_list"]) >= 2:
            fits[mode] = fit_scaling(cfg["n_list"], [table[n][mode] for n in cfg["n_list"]])
            summary[f"r2_{mode}"] = fits[mode].r2
    for n in cfg["n_list"]:
        summary[f"n{n}.l"] = block_length_for(n)
        for mode in cfg["modes"]:
            summary[f"n{n}.p_max_{mode}"] = table[n][mode]
    if set(cfg["modes"]) == {"ideal", "binary"}:
        write_summary_csv({n: (table[n]["ideal"], table[n]["binary"]) for n in cfg["n_list"]}, out / "summary.csv")
        arts.append("summary.csv")
        nmax = max(cfg["n_list"])
        pb = table[nmax]["binary"]
        summary["ratio_at_max_n"] = table[nmax]["ideal"] / pb if pb else math.inf
    if cfg["plots"]:
        plot_capacity(table, fits, out / "capacity.png")
        arts.append("capacity.png")
    return summary, arts


def run_crossbar(cfg, out: Path):
    d = resolve_dfa(cfg["dfa"])
    base = SeedStreams(cfg["seed"])
    ws = [d.resolve_word(w) for w in cfg["words"]]
    summary = {"runs": cfg["runs"], "successes": 0}
    arts = []
    with open(out / "runs.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["run", "word", "expected", "decoded", "success"])
        for k in range(cfg["runs"]):
            st = base.child(k)
            c, w, p, xbar = crossbar_network(d, st, cfg["crossbar"], cfg["w_scale_target"], cfg["ternary"],
                                             cfg["intra_block_low"], cfg["bridge_inputs"])
            ok = True
            for j, word in enumerate(ws):
                dump = [] if cfg["dump_reads"] else None
                r = snn_walk(p, None, c, d, word, st.rng("schedule"), on_ms=cfg["on_ms"], off_ms=cfg["off_ms"],
                             settle_ms=cfg["settle_ms"], xbar=xbar, dump=dump)
                wr.writerow([k, " ".join(word), " ".join(r.expected), " ".join(str(s) for s in r.decoded.gap_states),
                             int(r.success)])
                ok &= r.success
                if k == 0 and j == 0:
                    write_spikes_csv(r.trace, out / "run00_spikes.csv")
                    write_rates_csv(r.rates, out / "run00_rates.csv")
                    arts += ["run00_spikes.csv", "run00_rates.csv"]
                    if dump is not None:
                        times = np.unique(r.trace.times)
                        write_readout_csv(times, dump, out / "run00_reads.csv")
                        arts.append("run00_reads.csv")
                    if cfg["plots"]:
                        plot_raster(r.trace, out / "run00_raster.png", " ".join(word))
                        plot_rates(r.rates, out / "run00_rates.png", " ".join(word))
                        arts += ["run00_raster.png", "run00_rates.png"]
            summary["successes"] += int(ok)
            if k == 0:
                np.savetxt(out / "run00_conductance.csv", xbar.g, delimiter=",", fmt="%.6g")
    arts = ["runs.csv", "run00_conductance.csv"] + arts
    return summary, arts


def run_analogy_exp(cfg, out: Path):
    res = run_analogy(cfg["n"], cfg["l"], cfg["trials"], SeedStreams(cfg["seed"]).rng("codebook"))
    write_analogy_csv(res, out / "analogy.csv")
    summary = {}
    for r in res:
        key = f"case{r.case}.{r.query}"
        summary[f"{key}.hits"] = r.hits()
        summary[f"{key}.expected"] = EXPECTED[r.query]
        for a in ATOMS:
            summary[f"{key}.mean_{a}"] = r.mean(a)
    return summary, ["analogy.csv"]


def run_snr(cfg, out: Path):
    d = gen_moddiv_dfa(cfg["modulus"])
    res = snr_monte_carlo(d, cfg["n"], cfg["l"], cfg["draws"], cfg["state"], cfg["symbol"],
                          SeedStreams(cfg["seed"]), cfg["bridge_inputs"])
    summary = {}
    with open(out / "snr.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["condition", "separation", "predicted_separation", "std", "predicted_std"])
        for r in res:
            wr.writerow([r.condition, f"{r.separation:.6g}", f"{r.predicted_separation:.6g}",
                         f"{r.std:.6g}", f"{r.predicted_std:.6g}"])
            summary[f"{r.condition}.sep_rel_error"] = r.sep_error
            summary[f"{r.condition}.std_rel_error"] = r.std_error
    return summary, ["snr.csv"]


def run_energy(cfg, out: Path):
    r = energy_descent_check(cfg["n"], cfg["l"], cfg["patterns"], cfg["starts"],
                             SeedStreams(cfg["seed"]).rng("codebook"), cfg["max_sweeps"])
    with open(out / "energy.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["start", "update", "energy"])
        for s, tr in enumerate(r.energies):
            for k, e in enumerate(tr):
                wr.writerow([s, k, f"{e:.10g}"])
    if r.violations:
        raise InvariantViolation(f"energy increased in {r.violations} updates")
    return {"starts": r.starts, "updates": r.updates, "violations": r.violations,
            "unconverged": r.unconverged}, ["energy.csv"]


def run_regex(cfg, out: Path):
    streams = SeedStreams(cfg["seed"])
    pats = list(cfg["patterns"])
    rng = streams.rng("schedule")
    while len(pats) < len(cfg["patterns"]) + cfg["random_patterns"]:
        pats.append(random_regex(rng, cfg["alphabet"]))
    summary = {"patterns": len(pats), "oracle_mismatches": 0, "walked_patterns": 0, "walks": 0,
               "walk_successes": 0}
    with open(out / "regex.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["pattern", "states", "strings", "mismatches", "walks", "walk_successes"])
        for k, pat in enumerate(pats):
            chk = regex_oracle_check(pat, cfg["alphabet"], cfg["max_len"])
            summary["oracle_mismatches"] += len(chk.mismatches)
            nw = ns = 0
            if cfg["walk"] and chk.states <= cfg["max_states"]:
                _, _, res = regex_rnn_walks(pat, cfg["n"], cfg["l"], streams.child(k), cfg["walk_words"],
                                            cfg["walk_len"], cfg["alphabet"])
                nw, ns = len(res), sum(r.success for r in res)
                summary["walked_patterns"] += 1
            summary["walks"] += nw
            summary["walk_successes"] += ns
            wr.writerow([pat, chk.states, chk.strings, len(chk.mismatches), nw, ns])
    summary["walk_failures"] = summary["walks"] - summary["walk_successes"]
    return summary, ["regex.csv"]


RUNNERS = {
    "walk-snn": run_walk_snn, "walk-rnn": run_walk_rnn, "capacity": run_capacity, "crossbar": run_crossbar,
    "analogy": run_analogy_exp, "snr-check": run_snr, "energy-check": run_energy, "regex": run_regex,
}


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def run_experiment(cfg: dict, out: str | Path, bit_exact: bool = False) -> tuple[int, dict]:
    """Run one resolved config, writing artifacts and ``manifest.json`` into ``out``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"toolkit_version": toolkit_version(), "schema_version": cfgmod.SCHEMA_VERSION,
                "experiment": cfg["experiment"], "seed": cfg["seed"], "bit_exact": bool(bit_exact),
                "config": cfg, "status": "running", "artifacts": [], "summary": {}}
    code = EXIT_OK
    try:
        summary, arts = RUNNERS[cfg["experiment"]](cfg, out)
        manifest["summary"] = {k: _jsonable(v) for k, v in summary.items()}
        manifest["artifacts"] = arts
        manifest["status"] = "ok"
    except (InvariantViolation, FloatingPointError) as exc:
        manifest["status"] = "failed"
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        manifest["partial_artifacts"] = sorted(p.name for p in out.iterdir() if p.name != "manifest.json")
        code = EXIT_RUNTIME
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return code, manifest


# -- argument parsing ---------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="experiment config or manifest JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default=None, help="output directory (default runs/<subcommand>)")
    p.add_argument("--bit-exact", action="store_true", help="serial, deterministic evaluation order")
    p.add_argument("-v", "--verbose", action="store_true")


def _transform_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--binarize", type=float, metavar="BETA")
    p.add_argument("--noise", type=float, metavar="SIGMA")
    p.add_argument("--ternary", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--fixed-point", action="store_true")
    p.add_argument("--ideal", action="store_true", help="drop the configured transforms")


TRANSFORM_PRESETS = {
    "ideal": {},
    "binary": {"binarize": 2.0},
    "noisy": {"binarize": 2.0, "noise": 0.5},
    "fixed-point": {"fixed_point": True},
    "noisy-fixed-point": {"binarize": 2.0, "noise": 0.5, "fixed_point": True},
}


def parse_transform(text: str) -> dict:
    if text in TRANSFORM_PRESETS:
        base = TRANSFORM_PRESETS[text]
    else:
        try:
            base = json.loads(text)
        except json.JSONDecodeError:
            raise ConfigError(f"--transform: unknown preset {text!r} and not valid JSON") from None
        if not isinstance(base, dict):
            raise ConfigError("--transform JSON must be an object")
    return {"binarize": None, "noise": None, "ternary": None, "fixed_point": False, **base}


def _transform_from(args, current: dict | None) -> dict | None:
    flags = (args.binarize, args.noise, args.ternary, args.fixed_point, args.ideal)
    if not any(x not in (None, False) for x in flags):
        return None
    t = {"binarize": None, "noise": None, "ternary": None, "fixed_point": False}
    if not args.ideal and current:
        t.update(current)
    if args.binarize is not None:
        t["binarize"] = args.binarize
    if args.noise is not None:
        t["noise"] = args.noise
    if args.ternary is not None:
        t["ternary"] = list(args.ternary)
    if args.fixed_point:
        t["fixed_point"] = True
    return t


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fsma", description="Compile DFAs into attractor networks and run them.")
    ap.add_argument("--version", action="version", version=toolkit_version())
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in cfgmod.KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment from a config")
        _common(p)
        if kind in ("walk-snn", "walk-rnn"):
            _transform_flags(p)
    p = sub.add_parser("run-snn", help="one spiking walk from command-line flags")
    _common(p)
    p.add_argument("--dfa", default="moddiv:23", help="moddiv:<p>, counter, two-input, regex:<pat> or a spec file")
    p.add_argument("--word", action="append", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--l", type=int)
    p.add_argument("--timing", choices=["regular", "random"])
    p.add_argument("--backend", choices=["auto", "cython", "python"])
    p.add_argument("--transform", help="preset (" + ", ".join(TRANSFORM_PRESETS) + ") or a JSON object")
    _transform_flags(p)
    p = sub.add_parser("verify-golden", help="run the golden configs and compare with stored expectations")
    p.add_argument("--config", default=None, help="directory of golden files (default: the bundled set)")
    p.add_argument("--out", default="runs/golden")
    p.add_argument("--only", nargs="*")
    p.add_argument("--seed", type=int, default=0, help="offset added to every golden seed")
    p.add_argument("-v", "--verbose", action="store_true")
    p = sub.add_parser("schema", help="print the config schema")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "schema":
        print(json.dumps(cfgmod.schema(), indent=2))
        return EXIT_OK
    if args.command == "verify-golden":
        try:
            ok, report = verify_golden(args.config, args.out, args.only, args.seed)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        for r in report:
            line = f"{'PASS' if r['passed'] else 'FAIL'}  {r['criterion']}"
            print(line + (f"  ({r['detail']})" if r["detail"] else ""))
        return EXIT_OK if ok else EXIT_GOLDEN

    kind = "walk-snn" if args.command == "run-snn" else args.command
    try:
        over: dict = {"seed": args.seed}
        if args.command == "run-snn":
            over.update({"dfa": args.dfa, "words": args.word, "n": args.n, "l": args.l,
                         "timing": args.timing, "backend": args.backend})
        cfg = cfgmod.load(args.config, kind, **over)
        if getattr(args, "transform", None):
            cfg["transform"] = parse_transform(args.transform)
        if kind in ("walk-snn", "walk-rnn"):
            t = _transform_from(args, cfg["transform"])
            if t is not None:
                cfg["transform"] = t
        cfgmod.validate(cfg)
        out = Path(args.out or cfg.get("out") or f"runs/{args.command}")
        code, man = run_experiment(cfg, out, args.bit_exact)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DfaError, RegexError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if code != EXIT_OK:
        print(f"error: {man.get('error')}", file=sys.stderr)
    else:
        for k, v in man["summary"].items():
            print(f"{k}: {v}")
        print(f"artifacts in {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
