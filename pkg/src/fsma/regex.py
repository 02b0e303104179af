"""Regular expression -> minimal total DFA.

Supported syntax: literals, concatenation, ``|``, ``*``, ``+``, ``?`` and
parentheses.  The empty pattern (or an empty alternative) matches the empty
word.  Pipeline: Thompson NFA, subset construction, Hopcroft minimisation.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from .dfa import Dfa

_META = set("|*+?()")


class RegexError(ValueError):
    pass


# -- parsing ------------------------------------------------------------------
# AST nodes are tuples: ("eps",), ("lit", c), ("cat", a, b), ("alt", a, b), ("star", a)

class _Parser:
    def __init__(self, pattern: str):
        self.p = pattern
        self.i = 0

    def peek(self):
        return self.p[self.i] if self.i < len(self.p) else None

    def parse(self):
        node = self.alt()
        if self.i != len(self.p):
            raise RegexError(f"unexpected {self.p[self.i]!r} at position {self.i}")
        return node

    def alt(self):
        node = self.cat()
        while self.peek() == "|":
            self.i += 1
            node = ("alt", node, self.cat())
        return node

    def cat(self):
        node = ("eps",)
        while self.peek() is not None and self.peek() not in "|)":
            atom = self.postfix()
            node = atom if node == ("eps",) else ("cat", node, atom)
        return node

    def postfix(self):
        node = self.atom()
        while self.peek() is not None and self.peek() in "*+?":
            op = self.p[self.i]
            self.i += 1
            if op == "*":
                node = ("star", node)
            elif op == "+":
                node = ("cat", node, ("star", node))
            else:
                node = ("alt", node, ("eps",))
        return node

    def atom(self):
        c = self.peek()
        if c == "(":
            self.i += 1
            node = self.alt()
            if self.peek() != ")":
                raise RegexError(f"unbalanced '(' before position {self.i}")
            self.i += 1
            return node
        if c in _META:
            raise RegexError(f"unexpected {c!r} at position {self.i}")
        if c == "\\":
            if self.i + 1 >= len(self.p):
                raise RegexError("dangling escape")
            c = self.p[self.i + 1]
            self.i += 1
        self.i += 1
        return ("lit", c)


def parse_regex(pattern: str):
    return _Parser(pattern).parse()


def _literals(node) -> set[str]:
    if node[0] == "lit":
        return {node[1]}
    return set().union(*(_literals(c) for c in node[1:] if isinstance(c, tuple)))


# -- Thompson construction ----------------------------------------------------

@dataclass
class Nfa:
    start: int
    accept: int
    eps: dict[int, list[int]] = field(default_factory=dict)
    moves: dict[int, list[tuple[str, int]]] = field(default_factory=dict)
    n_states: int = 0


def thompson(node) -> Nfa:
    nfa = Nfa(0, 0)

    def new():
        nfa.n_states += 1
        return nfa.n_states - 1

    def eps(a, b):
        nfa.eps.setdefault(a, []).append(b)

    def build(node):
        kind = node[0]
        if kind == "eps":
            s, t = new(), new()
            eps(s, t)
        elif kind == "lit":
            s, t = new(), new()
            nfa.moves.setdefault(s, []).append((node[1], t))
        elif kind == "cat":
            s, m1 = build(node[1])
            m2, t = build(node[2])
            eps(m1, m2)
        elif kind == "alt":
            s, t = new(), new()
            for child in node[1:]:
                a, b = build(child)
                eps(s, a)
                eps(b, t)
        elif kind == "star":
            s, t = new(), new()
            a, b = build(node[1])
            eps(s, a)
            eps(s, t)
            eps(b, a)
            eps(b, t)
        else:  # pragma: no cover
            raise RegexError(f"bad node {kind}")
        return s, t

    nfa.start, nfa.accept = build(node)
    return nfa


def _closure(nfa: Nfa, states: Iterable[int]) -> frozenset[int]:
    seen = set(states)
    stack = list(seen)
    while stack:
        for t in nfa.eps.get(stack.pop(), ()):
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return frozenset(seen)


def subset_construction(nfa: Nfa, alphabet: list[str]):
    """Returns (transition table as list of dicts, accepting flags); state 0 is the start.

    The empty subset is kept as an explicit dead state so the table is total.
    """
    start = _closure(nfa, [nfa.start])
    index = {start: 0}
    order = [start]
    table: list[dict[str, int]] = []
    i = 0
    while i < len(order):
        cur = order[i]
        row = {}
        for a in alphabet:
            nxt = _closure(nfa, [t for s in cur for c, t in nfa.moves.get(s, ()) if c == a])
            if nxt not in index:
                index[nxt] = len(order)
                order.append(nxt)
            row[a] = index[nxt]
        table.append(row)
        i += 1
    return table, [nfa.accept in s for s in order]


def hopcroft_minimize(table: list[dict[str, int]], accepting: list[bool], alphabet: list[str]):
    """Partition refinement. Returns a block id per state."""
    n = len(table)
    inverse = {a: [[] for _ in range(n)] for a in alphabet}
    for s, row in enumerate(table):
        for a in alphabet:
            inverse[a][row[a]].append(s)
    acc = frozenset(i for i in range(n) if accepting[i])
    rej = frozenset(range(n)) - acc
    partition = [b for b in (acc, rej) if b]
    work = [b for b in partition]
    while work:
        splitter = work.pop()
        for a in alphabet:
            pre = {p for t in splitter for p in inverse[a][t]}
            if not pre:
                continue
            refined = []
            for block in partition:
                inter, diff = block & pre, block - pre
                if inter and diff:
                    refined.extend([inter, diff])
                    if block in work:
                        work.remove(block)
                        work.extend([inter, diff])
                    else:
                        work.append(inter if len(inter) <= len(diff) else diff)
                else:
                    refined.append(block)
            partition = refined
    block_of = [0] * n
    for bi, block in enumerate(partition):
        for s in block:
            block_of[s] = bi
    return block_of


def regex_to_dfa(pattern: str, alphabet: Iterable[str] | None = None) -> Dfa:
    """Minimal total DFA for ``pattern``; states are named q0, q1, ... in BFS order."""
    ast = parse_regex(pattern)
    lits = _literals(ast)
    if alphabet is None:
        alpha = sorted(lits) or ["0"]
    else:
        alpha = list(dict.fromkeys(alphabet))
        extra = lits - set(alpha)
        if extra:
            raise RegexError(f"pattern uses symbols outside the alphabet: {sorted(extra)}")
        if not alpha:
            raise RegexError("empty alphabet")
    table, accepting = subset_construction(thompson(ast), alpha)
    block_of = hopcroft_minimize(table, accepting, alpha)

    # renumber blocks in BFS order from the start block
    start = block_of[0]
    rep = {}
    for s in range(len(table)):
        rep.setdefault(block_of[s], s)
    names = {start: "q0"}
    queue = deque([start])
    while queue:
        b = queue.popleft()
        for a in alpha:
            nb = block_of[table[rep[b]][a]]
            if nb not in names:
                names[nb] = f"q{len(names)}"
                queue.append(nb)
    trans = {(names[b], a): names[block_of[table[rep[b]][a]]] for b in names for a in alpha}
    states = sorted(names.values(), key=lambda s: int(s[1:]))
    acc = {names[block_of[s]] for s in range(len(table)) if accepting[s] and block_of[s] in names}
    return Dfa(states, alpha, trans, "q0", acc)
