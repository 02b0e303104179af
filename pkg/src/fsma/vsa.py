"""Sparse block codes, block-constant bipolar vectors and their binding algebra.

Three hypervector flavours live here:

* ``SbcHypervector``  binary, one active component per block
* ``BmapHypervector`` bipolar, constant within each block
* ``PsbcHypervector`` bipolar sparse block code, one signed component per block

plus ``BlockVector`` for anything real-valued (superpositions, relaxed
network states).  All of them wrap a 1-D numpy array and a block length.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from decimal import Decimal, getcontext
from typing import Mapping

import numpy as np


class DimensionMismatch(ValueError):
    pass


def _as_array(x) -> np.ndarray:
    return x.data if isinstance(x, BlockVector) else np.asarray(x)


def _check_block_len(n: int, l: int) -> None:
    if l <= 0 or n <= 0 or n % l:
        raise DimensionMismatch(f"block length {l} does not divide dimension {n}")


@dataclass(frozen=True, eq=False)
class BlockVector:
    """Real-valued vector with block structure. Base of the typed variants."""

    data: np.ndarray
    l: int

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 1:
            raise DimensionMismatch("hypervectors are 1-D")
        _check_block_len(data.shape[0], self.l)
        data = data.copy()
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        self._validate()

    def _validate(self) -> None:
        pass

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def m(self) -> int:
        return self.n // self.l

    def blocks(self) -> np.ndarray:
        return self.data.reshape(self.m, self.l)

    def __add__(self, other: BlockVector) -> BlockVector:
        _check_same_shape(self, other)
        return BlockVector(self.data.astype(float) + other.data.astype(float), self.l)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BlockVector):
            return NotImplemented
        return self.l == other.l and np.array_equal(self.data, other.data)

    def __hash__(self):
        return hash((self.l, self.data.tobytes()))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={self.n}, l={self.l})"


@dataclass(frozen=True, eq=False, repr=False)
class SbcHypervector(BlockVector):
    def _validate(self) -> None:
        b = self.blocks()
        if not np.isin(b, (0, 1)).all() or not (b.sum(axis=1) == 1).all():
            raise ValueError("SBC hypervector needs exactly one 1 per block")

    @property
    def active_indices(self) -> np.ndarray:
        """Offset of the active component inside each block."""
        return self.blocks().argmax(axis=1)

    @property
    def coding_level(self) -> float:
        return 1.0 / self.l

    @classmethod
    def from_indices(cls, idx, l: int) -> SbcHypervector:
        idx = np.asarray(idx, dtype=np.int64)
        data = np.zeros((idx.size, l), dtype=np.int8)
        data[np.arange(idx.size), idx] = 1
        return cls(data.ravel(), l)


@dataclass(frozen=True, eq=False, repr=False)
class BmapHypervector(BlockVector):
    def _validate(self) -> None:
        b = self.blocks()
        if not np.isin(b, (-1, 1)).all() or not (b == b[:, :1]).all():
            raise ValueError("bMAP hypervector must be bipolar and block-constant")

    @property
    def block_signs(self) -> np.ndarray:
        return self.blocks()[:, 0].copy()

    def to_binary(self) -> np.ndarray:
        """Mask form s = (s_bar + 1) / 2."""
        return ((self.data + 1) // 2).astype(np.int8)

    @classmethod
    def from_binary(cls, s, l: int) -> BmapHypervector:
        return cls((2 * np.asarray(s, dtype=np.int8) - 1).astype(np.int8), l)

    @classmethod
    def from_signs(cls, signs, l: int) -> BmapHypervector:
        return cls(np.repeat(np.asarray(signs, dtype=np.int8), l), l)


@dataclass(frozen=True, eq=False, repr=False)
class PsbcHypervector(BlockVector):
    def _validate(self) -> None:
        b = self.blocks()
        if not np.isin(b, (-1, 0, 1)).all() or not (np.abs(b).sum(axis=1) == 1).all():
            raise ValueError("pSBC hypervector needs exactly one +-1 per block")

    @property
    def active_indices(self) -> np.ndarray:
        return np.abs(self.blocks()).argmax(axis=1)

    @property
    def block_signs(self) -> np.ndarray:
        b = self.blocks()
        return b[np.arange(self.m), self.active_indices].copy()


def _check_same_shape(a: BlockVector, b: BlockVector) -> None:
    if a.n != b.n or a.l != b.l:
        raise DimensionMismatch(f"shapes differ: (n={a.n}, l={a.l}) vs (n={b.n}, l={b.l})")


# -- generation ---------------------------------------------------------------

def gen_sbc(n: int, l: int, rng: np.random.Generator) -> SbcHypervector:
    _check_block_len(n, l)
    return SbcHypervector.from_indices(rng.integers(0, l, size=n // l), l)


def gen_bmap(n: int, l: int, rng: np.random.Generator) -> BmapHypervector:
    _check_block_len(n, l)
    signs = 2 * rng.integers(0, 2, size=n // l, dtype=np.int8) - 1
    return BmapHypervector.from_signs(signs, l)


def gen_psbc(n: int, l: int, rng: np.random.Generator) -> PsbcHypervector:
    return hadamard_bind(gen_sbc(n, l, rng), gen_bmap(n, l, rng))


def lcc_identity(n: int, l: int) -> SbcHypervector:
    """First component of every block active; the identity under LCC binding."""
    _check_block_len(n, l)
    return SbcHypervector.from_indices(np.zeros(n // l, dtype=np.int64), l)


# -- similarity and binding ---------------------------------------------------

def similarity(a, b) -> float:
    """Normalised inner product. For two SBC vectors this is overlap / M."""
    x, y = _as_array(a).astype(float), _as_array(b).astype(float)
    if x.shape != y.shape:
        raise DimensionMismatch(f"{x.shape} vs {y.shape}")
    nxx, nyy = float(x @ x), float(y @ y)
    if nxx == 0 or nyy == 0:
        return 0.0
    # one sqrt of the product keeps similarity(x, x) exactly 1 for integer vectors
    return float(x @ y) / math.sqrt(nxx * nyy)


def overlap(a: BlockVector, b: BlockVector) -> float:
    """Inner product divided by the number of blocks."""
    _check_same_shape(a, b)
    return float(a.data.astype(float) @ b.data.astype(float)) / a.m


def hadamard_bind(a: BlockVector, b: BlockVector) -> BlockVector:
    """Element-wise product. Self-inverse whenever one operand is bipolar."""
    _check_same_shape(a, b)
    out = a.data * b.data
    kinds = {type(a), type(b)}
    if kinds == {SbcHypervector, BmapHypervector} or kinds == {PsbcHypervector, BmapHypervector}:
        return PsbcHypervector(out, a.l)
    if kinds == {BmapHypervector}:
        return BmapHypervector(out, a.l)
    return BlockVector(out, a.l)


def mask(a, s) -> np.ndarray:
    """Component-wise AND of a binary state with a binary (block-constant) mask."""
    x, y = _as_array(a), _as_array(s)
    if x.shape != y.shape:
        raise DimensionMismatch(f"{x.shape} vs {y.shape}")
    return np.logical_and(x != 0, y != 0).astype(np.int8)


def _sparse_result(out: np.ndarray, l: int, a: BlockVector, b: BlockVector) -> BlockVector:
    sparse = (SbcHypervector, PsbcHypervector)
    if isinstance(a, sparse) and isinstance(b, sparse):
        if isinstance(a, SbcHypervector) and isinstance(b, SbcHypervector):
            return SbcHypervector(out.astype(np.int8), l)
        return PsbcHypervector(out.astype(np.int8), l)
    return BlockVector(out, l)


def _circ(x: np.ndarray, y: np.ndarray, l: int, sign: int) -> np.ndarray:
    xb, yb = x.reshape(-1, l), y.reshape(-1, l)
    out = np.zeros(xb.shape, dtype=np.result_type(xb, yb, np.int64))
    for shift in range(l):
        # convolution: out[n] += x[shift] * y[n - shift]
        # correlation: out[n] += y[shift] * x[n + shift]
        if sign > 0:
            out += xb[:, shift:shift + 1] * np.roll(yb, shift, axis=1)
        else:
            out += yb[:, shift:shift + 1] * np.roll(xb, -shift, axis=1)
    return out.ravel()


def lcc_bind(a: BlockVector, b: BlockVector) -> BlockVector:
    """Blockwise local circular convolution."""
    _check_same_shape(a, b)
    return _sparse_result(_circ(a.data, b.data, a.l, +1), a.l, a, b)


def lcc_unbind(c: BlockVector, b: BlockVector) -> BlockVector:
    """Blockwise circular correlation; undoes ``lcc_bind(., b)`` for sparse ``b``."""
    _check_same_shape(c, b)
    return _sparse_result(_circ(c.data, b.data, c.l, -1), c.l, c, b)


def block_argmax(x, l: int, mask=None) -> np.ndarray:
    """Winner-take-all inside every block.

    Ties go to the lowest index.  Blocks whose mask is entirely zero come out
    silent, so the result may have all-zero blocks.
    """
    x = np.asarray(x, dtype=float)
    _check_block_len(x.shape[-1], l)
    xb = x.reshape(-1, l)
    out = np.zeros(xb.shape, dtype=np.int8)
    if mask is None:
        out[np.arange(xb.shape[0]), xb.argmax(axis=1)] = 1
        return out.ravel()
    mb = np.asarray(mask).reshape(-1, l) != 0
    live = mb.any(axis=1)
    scores = np.where(mb, xb, -np.inf)
    win = scores.argmax(axis=1)
    rows = np.flatnonzero(live)
    out[rows, win[rows]] = 1
    return out.ravel()


# -- collision bounds ---------------------------------------------------------

@dataclass(frozen=True)
class CollisionCapacity:
    """Number of SBC vectors that can be drawn before any pair likely collides."""

    k: int
    log10_k: float


def hoeffding_exceedance_bound(m: int, theta: float) -> float:
    return math.exp(-2.0 * m * theta * theta)


def collision_capacity(n: int, l: int, theta: float, delta: float) -> CollisionCapacity:
    """floor(sqrt(2 delta) * exp(M theta^2)), evaluated in log space."""
    _check_block_len(n, l)
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    m = n // l
    ln_k = 0.5 * math.log(2.0 * delta) + m * theta * theta
    log10_k = ln_k / math.log(10.0)
    if ln_k < 0:
        return CollisionCapacity(0, log10_k)
    # big-integer floor without float overflow
    getcontext().prec = max(50, int(log10_k) + 30)
    k = int((Decimal(2 * delta).sqrt() * Decimal(m * theta * theta).exp()).to_integral_value(rounding="ROUND_FLOOR"))
    return CollisionCapacity(k, log10_k)


# -- codebooks ----------------------------------------------------------------

_KINDS = {"sbc": SbcHypervector, "bmap": BmapHypervector, "psbc": PsbcHypervector}
_GEN = {"sbc": gen_sbc, "bmap": gen_bmap, "psbc": gen_psbc}


@dataclass
class Codebook:
    """Named hypervectors drawn from one seed, in declaration order."""

    n: int
    l: int
    seed: int
    entries: dict[str, BlockVector] = field(default_factory=dict)

    @classmethod
    def generate(cls, n: int, l: int, seed: int, spec: Mapping[str, str]) -> Codebook:
        """``spec`` maps name -> kind ('sbc', 'bmap' or 'psbc')."""
        rng = np.random.default_rng(seed)
        book = cls(n, l, seed)
        for name, kind in spec.items():
            book.entries[name] = _GEN[kind](n, l, rng)
        return book

    def __getitem__(self, name: str) -> BlockVector:
        return self.entries[name]

    def kinds(self) -> dict[str, str]:
        rev = {v: k for k, v in _KINDS.items()}
        return {name: rev[type(v)] for name, v in self.entries.items()}

    def to_json(self) -> str:
        entries = {}
        for name, v in self.entries.items():
            if isinstance(v, SbcHypervector):
                entries[name] = {"kind": "sbc", "active_indices": v.active_indices.tolist()}
            elif isinstance(v, BmapHypervector):
                entries[name] = {"kind": "bmap", "block_signs": v.block_signs.tolist()}
            elif isinstance(v, PsbcHypervector):
                entries[name] = {"kind": "psbc", "active_indices": v.active_indices.tolist(),
                                 "block_signs": v.block_signs.tolist()}
            else:
                raise TypeError(f"cannot serialise {type(v).__name__}")
        return json.dumps({"n": self.n, "l": self.l, "seed": self.seed, "entries": entries}, indent=1)

    @classmethod
    def from_json(cls, text: str) -> Codebook:
        doc = json.loads(text)
        n, l = int(doc["n"]), int(doc["l"])
        book = cls(n, l, int(doc["seed"]))
        for name, e in doc["entries"].items():
            kind = e["kind"]
            if kind == "sbc":
                v = SbcHypervector.from_indices(e["active_indices"], l)
            elif kind == "bmap":
                v = BmapHypervector.from_signs(e["block_signs"], l)
            elif kind == "psbc":
                sbc = SbcHypervector.from_indices(e["active_indices"], l)
                v = hadamard_bind(sbc, BmapHypervector.from_signs(e["block_signs"], l))
            else:
                raise ValueError(f"unknown hypervector kind {kind!r}")
            if v.n != n:
                raise DimensionMismatch(f"entry {name!r} has dimension {v.n}, expected {n}")
            book.entries[name] = v
        return book
