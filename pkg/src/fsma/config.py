"""Experiment configuration: schema validation, defaults and seed streams."""
from __future__ import annotations

import copy
import json
import zlib
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

SCHEMA_VERSION = 1
KINDS = ("walk-snn", "walk-rnn", "capacity", "crossbar", "analogy", "snr-check", "energy-check", "regex")
STREAMS = ("codebook", "weights", "noise", "schedule")

_IDEAL = {"binarize": None, "noise": None, "ternary": None, "fixed_point": False}

DEFAULTS: dict[str, dict] = {
    "walk-snn": {
        "dfa": "moddiv:23", "n": 2048, "l": 8, "codebook": "random", "bridge_inputs": "all",
        "words": ["1000100", "1011100"], "random_words": 0, "max_word_len": 8,
        "transform": {**_IDEAL, "binarize": 2.0, "noise": 0.5},
        "w_scale_target": 0.1, "timing": "regular", "on_ms": 200.0, "off_ms": 200.0, "settle_ms": 400.0,
        "random_lo_ms": 200.0, "random_hi_ms": 1000.0, "dt": 0.05, "kick_current": 5.0,
        "decode_threshold": 0.5, "backend": "auto", "plots": True,
    },
    "walk-rnn": {
        "dfa": "moddiv:23", "n": 2048, "l": 8, "codebook": "random", "bridge_inputs": "all",
        "words": ["1000100", "1011100"], "random_words": 0, "max_word_len": 8,
        "transform": dict(_IDEAL), "on_steps": 10, "off_steps": 10,
    },
    "capacity": {
        "n_list": [512, 1024, 2048], "modes": ["ideal", "binary"], "trials": 10,
        "grid_lo": 2, "grid_hi": 200, "grid_ratio": 1.1, "threshold": 0.9,
        "words": 5, "word_len": 5, "plots": True,
    },
    "crossbar": {
        "dfa": "counter", "words": ["ssss"], "runs": 20,
        "crossbar": {"rows": 32, "cols": 128, "programming_cv": 0.1, "read_std": 0.05, "relaxation_cv": 0.05,
                     "faults": [{"row": 5, "col": "*", "kind": "stuck_low"}]},
        "w_scale_target": 4.0, "ternary": "default", "intra_block_low": True, "bridge_inputs": "incoming",
        "on_ms": 200.0, "off_ms": 200.0, "settle_ms": 400.0, "dump_reads": False, "plots": True,
    },
    "analogy": {"n": 1024, "l": 4, "trials": 100},
    "snr-check": {"modulus": 23, "n": 2048, "l": 8, "draws": 100, "state": "q5", "symbol": "s1",
                  "bridge_inputs": "all"},
    "energy-check": {"n": 512, "l": 8, "patterns": 10, "starts": 1000, "max_sweeps": 200},
    "regex": {"patterns": [], "random_patterns": 10, "alphabet": ["0", "1"], "max_len": 8, "walk": True,
              "max_states": 12, "n": 1024, "l": 8, "walk_words": 20, "walk_len": 8},
}


class ConfigError(ValueError):
    pass


def schema() -> dict:
    text = resources.files("fsma").joinpath("data/config.schema.json").read_text()
    return json.loads(text)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate(raw: dict) -> None:
    v = jsonschema.Draft202012Validator(schema())
    errors = sorted(v.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            where = "/".join(str(p) for p in e.absolute_path) or "<root>"
            lines.append(f"{where}: {e.message}")
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines))


def resolve(raw: dict, experiment: str | None = None) -> dict:
    """Validate ``raw`` and fill in defaults.  A manifest's config section is accepted too."""
    if "config" in raw and "toolkit_version" in raw:
        raw = raw["config"]
    raw = dict(raw)
    if experiment is not None:
        if raw.setdefault("experiment", experiment) != experiment:
            raise ConfigError(f"config is for {raw['experiment']!r}, not {experiment!r}")
    validate(raw)
    cfg = _merge(DEFAULTS[raw["experiment"]], raw)
    cfg.setdefault("seed", 0)
    cfg["schema_version"] = SCHEMA_VERSION
    return cfg


def load(path: str | Path | None, experiment: str | None = None, **overrides) -> dict:
    raw: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be an object")
    if "config" in raw and "toolkit_version" in raw:
        raw = raw["config"]
    raw = {**raw, **{k: v for k, v in overrides.items() if v is not None}}
    return resolve(raw, experiment)


class SeedStreams:
    """Independent generators derived from one seed, addressed by name.

    ``child(i)`` gives the streams of replicate ``i``; names hash to fixed
    spawn keys so adding a stream never shifts the others.
    """

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.path = tuple(path)

    def child(self, i: int) -> SeedStreams:
        return SeedStreams(self.seed, self.path + (int(i),))

    def sequence(self, name: str) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.seed, spawn_key=self.path + (zlib.crc32(name.encode()),))

    def rng(self, name: str) -> np.random.Generator:
        return np.random.default_rng(self.sequence(name))

    def int_seed(self, name: str) -> int:
        return int(self.sequence(name).generate_state(1)[0])
