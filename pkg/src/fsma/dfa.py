"""Deterministic finite automata: construction, text format and the walk oracle."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence


class DfaError(ValueError):
    pass


class DfaSyntaxError(DfaError):
    def __init__(self, msg: str, line: int, col: int = 1):
        super().__init__(f"line {line}, col {col}: {msg}")
        self.line = line
        self.col = col


class NonTotalTransitions(DfaError):
    def __init__(self, missing: Sequence[tuple[str, str]]):
        pairs = ", ".join(f"({q},{s})" for q, s in missing)
        super().__init__(f"transition function is not total; missing {pairs}")
        self.missing = list(missing)


@dataclass(frozen=True)
class Dfa:
    states: tuple[str, ...]
    inputs: tuple[str, ...]
    transitions: Mapping[tuple[str, str], str]
    initial: str
    accepting: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "transitions", dict(self.transitions))
        object.__setattr__(self, "accepting", frozenset(self.accepting))
        if len(set(self.states)) != len(self.states):
            raise DfaError("duplicate state ids")
        if len(set(self.inputs)) != len(self.inputs):
            raise DfaError("duplicate input symbols")
        known = set(self.states)
        if self.initial not in known:
            raise DfaError(f"initial state {self.initial!r} is not a declared state")
        if not self.accepting <= known:
            raise DfaError(f"accepting states {sorted(self.accepting - known)} are not declared")
        for (q, s), q2 in self.transitions.items():
            if q not in known or q2 not in known:
                raise DfaError(f"edge {q} -{s}-> {q2} references an unknown state")
            if s not in self.inputs:
                raise DfaError(f"edge {q} -{s}-> {q2} uses an unknown symbol")
        missing = [(q, s) for q in self.states for s in self.inputs if (q, s) not in self.transitions]
        if missing:
            raise NonTotalTransitions(missing)

    def step(self, q: str, s: str) -> str:
        return self.transitions[q, s]

    @property
    def edges(self) -> list[tuple[str, str, str]]:
        """Non-loop transitions (q, s, q') in state-major, symbol-minor order."""
        out = []
        for q in self.states:
            for s in self.inputs:
                q2 = self.transitions[q, s]
                if q2 != q:
                    out.append((q, s, q2))
        return out

    def resolve_word(self, word: str | Sequence[str]) -> list[str]:
        """Turn '1000100' into ['s1', 's0', ...] when symbols are named s0, s1."""
        if not isinstance(word, str):
            return list(word)
        out = []
        for ch in word:
            if ch in self.inputs:
                out.append(ch)
            elif "s" + ch in self.inputs:
                out.append("s" + ch)
            else:
                raise DfaError(f"unknown input symbol {ch!r}")
        return out

    def accepts(self, word) -> bool:
        return dfa_walk(self, word) in self.accepting


def dfa_walk(d: Dfa, word: str | Iterable[str]) -> str:
    q = d.initial
    for s in d.resolve_word(word) if isinstance(word, str) else word:
        if s not in d.inputs:
            raise DfaError(f"unknown input symbol {s!r}")
        q = d.transitions[q, s]
    return q


def dfa_trace(d: Dfa, word) -> list[str]:
    """States visited, starting with the initial state."""
    q = d.initial
    out = [q]
    for s in d.resolve_word(word):
        q = d.transitions[q, s]
        out.append(q)
    return out


def gen_moddiv_dfa(p: int) -> Dfa:
    """Remainder of an MSB-first binary number modulo ``p``."""
    if p < 2:
        raise DfaError("modulus must be at least 2")
    states = [f"q{i}" for i in range(p)]
    trans = {}
    for i in range(p):
        trans[f"q{i}", "s0"] = f"q{(2 * i) % p}"
        trans[f"q{i}", "s1"] = f"q{(2 * i + 1) % p}"
    return Dfa(states, ("s0", "s1"), trans, "q0", {"q0"})


def binary_word(d: int, width: int | None = None) -> str:
    w = format(d, "b")
    return w.zfill(width) if width else w


def cycle_dfa(sequence: Sequence[tuple[str, str, str]], missing: str = "self-loop") -> Dfa:
    """DFA from a chain of edges; unused (state, symbol) pairs self-loop."""
    states, inputs = [], []
    for q, s, q2 in sequence:
        for x in (q, q2):
            if x not in states:
                states.append(x)
        if s not in inputs:
            inputs.append(s)
    trans = {(q, s): q2 for q, s, q2 in sequence}
    if missing == "self-loop":
        for q in states:
            for s in inputs:
                trans.setdefault((q, s), q)
    return Dfa(states, inputs, trans, states[0], ())


def counter_dfa() -> Dfa:
    """q0 -s-> q1 -s-> q2 -s-> q3 -s-> q0"""
    return cycle_dfa([("q0", "s", "q1"), ("q1", "s", "q2"), ("q2", "s", "q3"), ("q3", "s", "q0")])


def two_input_dfa() -> Dfa:
    """q0 -a-> q1 -a-> q2 -b-> q3 -b-> q0, self-loops elsewhere."""
    return cycle_dfa([("q0", "a", "q1"), ("q1", "a", "q2"), ("q2", "b", "q3"), ("q3", "b", "q0")])


# -- text format --------------------------------------------------------------

_HEADER_KEYS = ("states", "inputs", "initial", "accepting", "missing")


def parse_dfa_spec(text: str) -> Dfa:
    """Parse the line-oriented DFA format.

    ``missing: self-loop`` completes absent transitions with self-loops;
    the default ``missing: error`` rejects them.
    """
    header: dict[str, list[str]] = {}
    edges: list[tuple[str, str, str, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        indent = len(line) - len(line.lstrip())
        key, sep, rest = line.strip().partition(":")
        if not sep:
            raise DfaSyntaxError("expected 'key: value'", lineno, indent + 1)
        key = key.strip()
        vals = rest.split()
        col = indent + len(key) + 2
        if key == "edge":
            if len(vals) != 3:
                raise DfaSyntaxError("edge needs exactly 'source symbol target'", lineno, col)
            edges.append((*vals, lineno))
        elif key in _HEADER_KEYS:
            if key in header:
                raise DfaSyntaxError(f"duplicate '{key}' line", lineno, indent + 1)
            header[key] = vals
        else:
            raise DfaSyntaxError(f"unknown key {key!r}", lineno, indent + 1)

    for key in ("states", "inputs", "initial"):
        if key not in header or not header[key]:
            raise DfaError(f"missing required '{key}' line")
    if len(header["initial"]) != 1:
        raise DfaError("'initial' takes exactly one state")
    policy = header.get("missing", ["error"])
    if policy not in (["error"], ["self-loop"]):
        raise DfaError(f"'missing' must be 'error' or 'self-loop', got {' '.join(policy)!r}")

    states, inputs = header["states"], header["inputs"]
    known_q, known_s = set(states), set(inputs)
    trans: dict[tuple[str, str], str] = {}
    for q, s, q2, lineno in edges:
        for x in (q, q2):
            if x not in known_q:
                raise DfaSyntaxError(f"unknown state {x!r}", lineno)
        if s not in known_s:
            raise DfaSyntaxError(f"unknown symbol {s!r}", lineno)
        if (q, s) in trans and trans[q, s] != q2:
            raise DfaSyntaxError(f"conflicting transitions for ({q},{s})", lineno)
        trans[q, s] = q2
    if policy == ["self-loop"]:
        for q in states:
            for s in inputs:
                trans.setdefault((q, s), q)
    return Dfa(states, inputs, trans, header["initial"][0], header.get("accepting", []))


def serialize_dfa(d: Dfa) -> str:
    lines = [
        "states: " + " ".join(d.states),
        "inputs: " + " ".join(d.inputs),
        "initial: " + d.initial,
        "accepting: " + " ".join(q for q in d.states if q in d.accepting),
        "missing: error",
    ]
    for q in d.states:
        for s in d.inputs:
            lines.append(f"edge: {q} {s} {d.transitions[q, s]}")
    return "\n".join(lines) + "\n"
