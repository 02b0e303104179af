import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fsma.vsa import (BlockVector, BmapHypervector, Codebook, DimensionMismatch, PsbcHypervector, SbcHypervector,
                      block_argmax, collision_capacity, gen_bmap, gen_psbc, gen_sbc, hadamard_bind,
                      hoeffding_exceedance_bound, lcc_bind, lcc_identity, lcc_unbind, mask, overlap, similarity)

shapes = st.sampled_from([(8, 4), (16, 4), (24, 8), (64, 8), (30, 5), (12, 3)])
seeds = st.integers(0, 2**32 - 1)


def lcc_oracle(a, b, l):
    """Direct per-block circular convolution, one output index at a time."""
    a, b = np.asarray(a).reshape(-1, l), np.asarray(b).reshape(-1, l)
    out = np.zeros_like(a, dtype=np.int64)
    for k in range(a.shape[0]):
        for n in range(l):
            out[k, n] = sum(int(a[k, j]) * int(b[k, (n - j) % l]) for j in range(l))
    return out.ravel()


def corr_oracle(c, b, l):
    c, b = np.asarray(c).reshape(-1, l), np.asarray(b).reshape(-1, l)
    out = np.zeros_like(c, dtype=np.int64)
    for k in range(c.shape[0]):
        for n in range(l):
            out[k, n] = sum(int(c[k, (n + j) % l]) * int(b[k, j]) for j in range(l))
    return out.ravel()


def test_gen_sbc_small_example():
    v = gen_sbc(8, 4, np.random.default_rng(0))
    assert v.data.sum() == 2
    assert v.data[:4].sum() == 1 and v.data[4:].sum() == 1


def test_same_seed_bit_identical():
    a = gen_sbc(256, 8, np.random.default_rng(7))
    b = gen_sbc(256, 8, np.random.default_rng(7))
    assert a == b


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        gen_sbc(10, 4, np.random.default_rng(0))
    with pytest.raises(DimensionMismatch):
        similarity(np.ones(8), np.ones(4))
    with pytest.raises(DimensionMismatch):
        lcc_bind(gen_sbc(8, 4, np.random.default_rng(0)), gen_sbc(8, 2, np.random.default_rng(0)))


def test_gen_bmap_structure_and_balance(rng):
    v = gen_bmap(8, 4, rng)
    assert (v.data[:4] == v.data[0]).all() and (v.data[4:] == v.data[4]).all()
    frac = np.mean([(gen_bmap(64, 8, rng).block_signs > 0).mean() for _ in range(10000)])
    assert abs(frac - 0.5) < 0.02


def test_bmap_binary_round_trip(rng):
    v = gen_bmap(64, 8, rng)
    assert BmapHypervector.from_binary(v.to_binary(), 8) == v
    assert np.array_equal(2 * v.to_binary() - 1, v.data)


def test_invalid_vectors_rejected():
    with pytest.raises(ValueError):
        SbcHypervector(np.array([1, 1, 0, 0]), 4)
    with pytest.raises(ValueError):
        BmapHypervector(np.array([1, -1, 1, 1]), 4)
    with pytest.raises(ValueError):
        PsbcHypervector(np.array([1, 0, 0, 2]), 4)


def test_similarity_self_and_sbc_overlap(rng):
    x = gen_sbc(64, 8, rng)
    y = gen_sbc(64, 8, rng)
    assert similarity(x, x) == 1.0
    assert similarity(x, y) == pytest.approx(int(x.data @ y.data) / x.m)


def test_mean_similarity_is_coding_level(rng):
    n, l, pairs = 512, 8, 10000
    m, f = n // l, 1 / l
    sims = [similarity(gen_sbc(n, l, rng), gen_sbc(n, l, rng)) for _ in range(pairs)]
    assert abs(np.mean(sims) - f) < 3 * math.sqrt(f * (1 - f) / (m * pairs))
    assert abs(np.mean(sims) - 0.125) < 0.01


def test_bound_state_orthogonal_to_state(rng):
    vals = []
    for _ in range(10000):
        q = gen_sbc(256, 8, rng)
        vals.append(similarity(hadamard_bind(q, gen_bmap(256, 8, rng)), q))
    assert abs(np.mean(vals)) < 0.02


def test_bound_state_against_masked_state(rng):
    n, l = 2048, 8
    m = n // l
    vals = []
    for _ in range(500):
        q, s = gen_sbc(n, l, rng), gen_bmap(n, l, rng)
        vals.append(int(hadamard_bind(q, s).data.astype(np.int64) @ mask(q, s.to_binary())))
    # oracle: each of the M active components survives the mask with probability 1/2
    assert abs(np.mean(vals) - m / 2) < 4 * math.sqrt(m / 4 / 500)


def test_hadamard_identity_element(rng):
    q = gen_sbc(64, 8, rng)
    plus = BmapHypervector(np.ones(64, dtype=np.int8), 8)
    assert np.array_equal(hadamard_bind(q, plus).data, q.data)


def test_mask_cases(rng):
    q, s = gen_sbc(64, 8, rng), gen_bmap(64, 8, rng)
    assert np.array_equal(mask(q, np.ones(64)), q.data)
    assert not mask(q, np.zeros(64)).any()
    pops = [mask(gen_sbc(512, 8, rng), gen_bmap(512, 8, rng).to_binary()).sum() for _ in range(10000)]
    assert abs(np.mean(pops) / 32 - 1) < 0.05
    assert mask(q, s.to_binary()).sum() == (s.block_signs > 0).sum()


@given(shapes, seeds)
def test_hadamard_involution(shape, seed):
    n, l = shape
    r = np.random.default_rng(seed)
    a, b = gen_sbc(n, l, r), gen_bmap(n, l, r)
    assert hadamard_bind(hadamard_bind(a, b), b) == a
    p = gen_psbc(n, l, r)
    assert hadamard_bind(hadamard_bind(p, b), b) == p


@given(shapes, seeds)
def test_lcc_matches_oracle(shape, seed):
    n, l = shape
    r = np.random.default_rng(seed)
    a, b = gen_psbc(n, l, r), gen_psbc(n, l, r)
    assert np.array_equal(lcc_bind(a, b).data, lcc_oracle(a.data, b.data, l))
    assert np.array_equal(lcc_unbind(a, b).data, corr_oracle(a.data, b.data, l))


@given(shapes, seeds)
def test_lcc_identity_round_trip_assoc_comm(shape, seed):
    n, l = shape
    r = np.random.default_rng(seed)
    a, b, c = gen_psbc(n, l, r), gen_psbc(n, l, r), gen_psbc(n, l, r)
    ident = lcc_identity(n, l)
    assert lcc_bind(a, ident) == a
    assert lcc_unbind(lcc_bind(a, b), b) == a
    assert lcc_bind(a, b) == lcc_bind(b, a)
    assert lcc_bind(lcc_bind(a, b), c) == lcc_bind(a, lcc_bind(b, c))
    s1, s2 = gen_sbc(n, l, r), gen_sbc(n, l, r)
    assert isinstance(lcc_bind(s1, s2), SbcHypervector)
    assert lcc_unbind(lcc_bind(s1, s2), s2) == s1


@given(shapes, seeds)
def test_hadamard_lcc_commutation(shape, seed):
    n, l = shape
    r = np.random.default_rng(seed)
    x1, x2 = gen_psbc(n, l, r), gen_sbc(n, l, r)
    m1, m2 = gen_bmap(n, l, r), gen_bmap(n, l, r)
    lhs = lcc_bind(hadamard_bind(x1, m1), hadamard_bind(x2, m2))
    rhs = hadamard_bind(hadamard_bind(m1, m2), lcc_bind(x1, x2))
    assert lhs == rhs


@given(st.integers(1, 20), st.integers(1, 8), seeds)
def test_block_argmax_one_hot_fixed_point(m, l, seed):
    v = gen_sbc(m * l, l, np.random.default_rng(seed))
    assert np.array_equal(block_argmax(v.data, l), v.data)


def test_block_argmax_ties_and_masks():
    x = np.array([1.0, 3.0, 3.0, 0.0, 5.0, 5.0, 5.0, 5.0])
    assert list(block_argmax(x, 4)) == [0, 1, 0, 0, 1, 0, 0, 0]
    mk = np.array([1, 1, 1, 1, 0, 0, 0, 0])
    out = block_argmax(x, 4, mk)
    assert list(out[4:]) == [0, 0, 0, 0]
    assert list(block_argmax(x, 4, np.array([1, 0, 1, 1, 1, 1, 1, 1]))[:4]) == [0, 0, 1, 0]


@given(st.lists(st.floats(-10, 10), min_size=16, max_size=16))
def test_block_argmax_deterministic(vals):
    x = np.array(vals)
    a = block_argmax(x, 4)
    assert np.array_equal(a, block_argmax(x, 4))
    for k in range(4):
        blk = x[4 * k:4 * k + 4]
        assert a[4 * k + int(np.argmax(blk))] == 1


def test_hoeffding_bound_empirical(rng):
    n, l, theta = 1000, 8, 0.2
    m = n // l
    a = rng.integers(0, l, (20000, m))
    b = rng.integers(0, l, (20000, m))
    rate = ((a == b).mean(axis=1) > 1 / l + theta).mean()
    assert rate <= hoeffding_exceedance_bound(m, theta) == pytest.approx(math.exp(-2 * m * theta**2))


def test_collision_capacity_formula():
    n, l, delta = 1000, 8, 1e-4
    theta = (1 - 1 / l) / 2
    cap = collision_capacity(n, l, theta, delta)
    ref = math.sqrt(2 * delta) * math.exp((n // l) * theta**2)
    assert cap.k == math.floor(ref)
    assert cap.log10_k == pytest.approx(math.log10(ref))
    assert collision_capacity(n, l, theta, 1e-300).k < cap.k
    big = collision_capacity(10**6, 8, 0.4, 1e-4)
    assert big.log10_k > 300 and big.k > 10**300
    with pytest.raises(ValueError):
        collision_capacity(n, l, 1.5, delta)


def test_codebook_json_round_trip():
    book = Codebook.generate(64, 8, 3, {"a": "sbc", "b": "bmap", "c": "psbc"})
    back = Codebook.from_json(book.to_json())
    assert back.kinds() == book.kinds()
    for k in ("a", "b", "c"):
        assert back[k] == book[k]
    doc = json.loads(book.to_json())
    assert set(doc) == {"n", "l", "seed", "entries"}


def test_superposition_and_overlap(rng):
    a, b = gen_sbc(64, 8, rng), gen_sbc(64, 8, rng)
    s = a + b
    assert isinstance(s, BlockVector)
    assert overlap(s, a) == pytest.approx(1 + overlap(a, b))
