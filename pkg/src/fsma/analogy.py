"""'What is the dollar of Mexico?' with mixed SBC / bMAP / pSBC representations.

Three assignments of hypervector types to roles (capital, currency) and
fillers (city, currency name):

* case 1: everything pSBC, role-filler pairs bound with LCC
* case 2: roles SBC, fillers bMAP, pairs bound with the Hadamard product
* case 3: roles bMAP, fillers SBC, pairs bound with the Hadamard product

Every case answers two queries: the currency of the USA and the Mexican
counterpart of the dollar.  Scores are overlaps (inner product / M) against
every atom; bMAP atoms are first bound to the LCC identity so they live in
the same sparse space as the queries.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .vsa import (BlockVector, BmapHypervector, gen_bmap, gen_psbc, gen_sbc, hadamard_bind,
                  lcc_bind, lcc_identity, lcc_unbind, overlap)

ROLES = ("cap", "cur")
FILLERS = ("wdc", "dol", "mxc", "pes")
ATOMS = ROLES + FILLERS
CASES = (1, 2, 3)
QUERIES = ("usa_currency", "mexico_dollar")
EXPECTED = {"usa_currency": "dol", "mexico_dollar": "pes"}

_KINDS = {1: ("psbc", "psbc"), 2: ("sbc", "bmap"), 3: ("bmap", "sbc")}
_GEN = {"sbc": gen_sbc, "bmap": gen_bmap, "psbc": gen_psbc}


def draw_atoms(case: int, n: int, l: int, rng: np.random.Generator) -> dict[str, BlockVector]:
    role_kind, filler_kind = _KINDS[case]
    atoms = {name: _GEN[role_kind](n, l, rng) for name in ROLES}
    atoms.update({name: _GEN[filler_kind](n, l, rng) for name in FILLERS})
    return atoms


def _pair(case: int, role: BlockVector, filler: BlockVector) -> BlockVector:
    return lcc_bind(role, filler) if case == 1 else hadamard_bind(role, filler)


def _sparse_form(v: BlockVector) -> BlockVector:
    if isinstance(v, BmapHypervector):
        return hadamard_bind(lcc_identity(v.n, v.l), v)
    return v


def queries(case: int, atoms: dict[str, BlockVector]) -> dict[str, BlockVector]:
    a = atoms
    usa = _pair(case, a["cap"], a["wdc"]) + _pair(case, a["cur"], a["dol"])
    mex = _pair(case, a["cap"], a["mxc"]) + _pair(case, a["cur"], a["pes"])
    if case == 3:
        # bMAP role: Hadamard unbinding
        cur_q = hadamard_bind(usa, a["cur"])
    else:
        cur_q = lcc_unbind(usa, a["cur"])
    mex_q = lcc_bind(lcc_unbind(mex, usa), _sparse_form(a["dol"]))
    return {"usa_currency": cur_q, "mexico_dollar": mex_q}


def score(query: BlockVector, atoms: dict[str, BlockVector]) -> dict[str, float]:
    return {name: overlap(query, _sparse_form(v)) for name, v in atoms.items()}


@dataclass
class AnalogyResult:
    case: int
    query: str
    scores: np.ndarray  # (trials, len(ATOMS))

    @property
    def top(self) -> np.ndarray:
        return np.asarray(ATOMS)[self.scores.argmax(axis=1)]

    def hits(self) -> int:
        return int((self.top == EXPECTED[self.query]).sum())

    def mean(self, atom: str) -> float:
        return float(self.scores[:, ATOMS.index(atom)].mean())


def run_analogy(n: int = 1024, l: int = 4, trials: int = 100,
                rng: np.random.Generator | None = None) -> list[AnalogyResult]:
    rng = np.random.default_rng(0) if rng is None else rng
    out = []
    for case in CASES:
        sc = {q: np.zeros((trials, len(ATOMS))) for q in QUERIES}
        for t in range(trials):
            atoms = draw_atoms(case, n, l, rng)
            for q, vec in queries(case, atoms).items():
                s = score(vec, atoms)
                sc[q][t] = [s[a] for a in ATOMS]
        out += [AnalogyResult(case, q, sc[q]) for q in QUERIES]
    return out


def write_analogy_csv(results: list[AnalogyResult], path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["case", "query", "expected", "hits", "trials"] + [f"mean_{a}" for a in ATOMS])
        for r in results:
            wr.writerow([r.case, r.query, EXPECTED[r.query], r.hits(), len(r.scores)]
                        + [f"{r.mean(a):.6g}" for a in ATOMS])
