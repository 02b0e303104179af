"""Golden verification: rerun committed configs and compare their summaries with stored expectations.

A golden file holds one criterion::

    {"criterion": "c8-crossbar",
     "runs": [{"config": {...experiment config...}, "expect": {"successes": {"min": 18}}},
              {"check": "crossbar-equivalence", "params": {...}, "expect": {"identical": true}}]}

``config`` runs go through the normal experiment runner; ``check`` runs call one
of the built-in checks below for properties that are not experiments of their own.
An expectation is either a literal (compared with ``==``) or an object with any of
``min``, ``max``, ``approx`` (+ ``rel`` / ``abs``).
"""
from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ConfigError, SeedStreams
from .crossbar import run_closed_loop
from .experiments import crossbar_network, hoeffding_check, resolve_dfa
from .snn import run_snn, word_schedule
from .vsa import (collision_capacity, gen_bmap, gen_psbc, gen_sbc, hadamard_bind, lcc_bind, lcc_identity,
                  lcc_unbind, similarity)


def default_dir() -> Path:
    return Path(str(resources.files("fsma").joinpath("goldens")))


# -- built-in checks -----------------------------------------------------------------

def check_vsa_algebra(seed: int = 0, n: int = 1024, l: int = 8, instances: int = 100, pairs: int = 10000) -> dict:
    rng = SeedStreams(seed).rng("codebook")
    ident = lcc_identity(n, l)
    bad = dict.fromkeys(("involution", "identity", "round_trip", "commutation", "associative", "commutative"), 0)
    for _ in range(instances):
        a, b, x = gen_psbc(n, l, rng), gen_psbc(n, l, rng), gen_psbc(n, l, rng)
        s, m1, m2 = gen_sbc(n, l, rng), gen_bmap(n, l, rng), gen_bmap(n, l, rng)
        bad["involution"] += hadamard_bind(hadamard_bind(s, m1), m1) != s
        bad["identity"] += lcc_bind(a, ident) != a
        bad["round_trip"] += lcc_unbind(lcc_bind(a, b), b) != a
        lhs = lcc_bind(hadamard_bind(a, m1), hadamard_bind(b, m2))
        bad["commutation"] += lhs != hadamard_bind(lcc_bind(a, b), hadamard_bind(m1, m2))
        bad["associative"] += lcc_bind(lcc_bind(a, b), x) != lcc_bind(a, lcc_bind(b, x))
        bad["commutative"] += lcc_bind(a, b) != lcc_bind(b, a)
    m = n // l
    f = 1.0 / l
    sims = np.array([similarity(gen_sbc(n, l, rng), gen_sbc(n, l, rng)) for _ in range(pairs)])
    tol = 3 * math.sqrt(f * (1 - f) / (m * pairs))
    out = {f"{k}_failures": int(v) for k, v in bad.items()}
    out.update({"mean_similarity": float(sims.mean()), "similarity_error": float(abs(sims.mean() - f)),
                "similarity_tolerance": tol, "similarity_ok": bool(abs(sims.mean() - f) < tol)})
    return out


def check_hoeffding(seed: int = 0, n: int = 1000, l: int = 8, theta: float = 0.2, pairs: int = 100000,
                    delta: float = 1e-4, reference_k: float = 3e9) -> dict:
    rate, bound = hoeffding_check(n, l, theta, pairs, SeedStreams(seed).rng("codebook"))
    cap = collision_capacity(n, l, (1 - 1 / l) / 2, delta)
    ratio = 10 ** (cap.log10_k - math.log10(reference_k))
    return {"rate": rate, "bound": bound, "rate_within_bound": rate <= bound, "log10_k": cap.log10_k,
            "k_ratio": ratio, "k_within_factor_2": 0.5 <= ratio <= 2.0}


def check_crossbar_equivalence(seed: int = 0, dfas=(("counter", "ssss"), ("two-input", "aabb"))) -> dict:
    """Zero-noise, fault-free crossbar vs the in-memory engine on identical inputs."""
    zero = {"programming_cv": 0.0, "read_std": 0.0, "relaxation_cv": 0.0, "faults": []}
    out = {"identical": True}
    for name, word in dfas:
        d = resolve_dfa(name)
        st = SeedStreams(seed)
        c, w, p, xbar = crossbar_network(d, st, zero)
        sched = word_schedule(d.resolve_word(word))
        a = run_snn(p, w, c, d, sched, st.rng("schedule"))
        b = run_closed_loop(p, xbar, c, d, sched, st.rng("schedule"))
        same = a.times.size == b.times.size and np.array_equal(a.times, b.times) \
            and np.array_equal(a.neurons, b.neurons)
        out[f"{name}.spikes"] = int(a.times.size)
        out[f"{name}.identical"] = bool(same)
        out["identical"] &= bool(same)
    return out


CHECKS = {"vsa-algebra": check_vsa_algebra, "hoeffding": check_hoeffding,
          "crossbar-equivalence": check_crossbar_equivalence}


# -- comparison ---------------------------------------------------------------------

def matches(actual, expect) -> bool:
    if isinstance(expect, dict):
        if not isinstance(actual, (int, float)) or isinstance(actual, bool):
            return False
        ok = True
        if "min" in expect:
            ok &= actual >= expect["min"]
        if "max" in expect:
            ok &= actual <= expect["max"]
        if "approx" in expect:
            tol = expect.get("rel", 0.0) * abs(expect["approx"]) + expect.get("abs", 0.0)
            ok &= abs(actual - expect["approx"]) <= tol
        return bool(ok)
    return actual == expect


def load_golden(path: Path) -> dict:
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict) or not isinstance(doc.get("criterion"), str):
        raise ConfigError("missing 'criterion'")
    runs = doc.get("runs")
    if not isinstance(runs, list) or not runs:
        raise ConfigError("'runs' must be a non-empty list")
    for r in runs:
        if not isinstance(r, dict) or ("config" in r) == ("check" in r):
            raise ConfigError("each run needs exactly one of 'config' or 'check'")
        if not isinstance(r.get("expect"), dict) or not r["expect"]:
            raise ConfigError("each run needs a non-empty 'expect' object")
        if "check" in r and r["check"] not in CHECKS:
            raise ConfigError(f"unknown check {r['check']!r}")
        if "config" in r:
            cfgmod.validate(r["config"])
    return doc


def verify_golden(config_dir=None, out="runs/golden", only=None, seed_offset: int = 0, run_experiment=None):
    """Run every golden file; returns (all_passed, [{criterion, passed, detail}])."""
    if run_experiment is None:
        from .cli import run_experiment
    config_dir = default_dir() if config_dir is None else Path(config_dir)
    files = sorted(Path(config_dir).glob("*.json"))
    if not files:
        raise ConfigError(f"no golden files in {config_dir}")
    report = []
    for f in files:
        name = f.stem
        try:
            doc = load_golden(f)
        except (json.JSONDecodeError, ConfigError, OSError) as exc:
            if not only or name in only:
                report.append({"criterion": name, "passed": False, "detail": f"corrupt golden file {f.name}: {exc}"})
            continue
        name = doc["criterion"]
        if only and name not in only:
            continue
        bad = []
        for k, r in enumerate(doc["runs"]):
            if "config" in r:
                cfg = cfgmod.resolve(r["config"])
                cfg["seed"] += seed_offset
                code, man = run_experiment(cfg, Path(out) / name / f"run{k}")
                summary = man["summary"]
                if man["status"] != "ok":
                    bad.append(f"run{k}: {man.get('error', 'failed')}")
            else:
                params = dict(r.get("params", {}))
                params["seed"] = params.get("seed", 0) + seed_offset
                summary = CHECKS[r["check"]](**params)
            for key, exp in r["expect"].items():
                act = summary.get(key)
                if not matches(act, exp):
                    bad.append(f"run{k} {key}: got {act!r}, expected {exp!r}")
        report.append({"criterion": name, "passed": not bad, "detail": "; ".join(bad)})
    return all(r["passed"] for r in report), report
