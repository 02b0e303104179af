import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fsma.compiler import add_weight_noise, binarize_stochastic, build_attractor_weights, build_weights, make_codebook
from fsma.dfa import dfa_walk, gen_moddiv_dfa
from fsma.rnn import (InputSchedule, block_length_for, capacity_sweep, fit_scaling, geometric_grid,
                      p_max_from_rows, relax, rnn_step, rnn_step_async, run_capacity_trial, run_walk, run_walks,
                      search_p_max, success_rate, write_summary_csv, write_sweep_csv)
from fsma.vsa import DimensionMismatch, gen_sbc


@pytest.fixture(scope="module")
def net():
    d = gen_moddiv_dfa(23)
    c = make_codebook(d, 2048, 8, np.random.default_rng(11))
    return d, c, build_weights(d, c)


def test_stored_state_is_fixed(net):
    d, c, w = net
    z = c.q[c.state_index("q5")]
    assert np.array_equal(rnn_step(w, z), z)


def test_masked_drive_converges_to_bridge(net):
    d, c, w = net
    mk = c.mask_for("s1")
    z = c.q[c.state_index("q5")]
    target = c.b[c.state_index("q11")] * mk
    for _ in range(2):
        z = rnn_step(w, z, mk)
    assert np.array_equal(z, target)


def test_zero_state_deterministic(net):
    d, c, w = net
    z0 = np.zeros(c.n, dtype=np.int8)
    a = rnn_step(w, z0)
    assert np.array_equal(a, rnn_step(w, z0))
    assert (a.reshape(-1, 8).sum(axis=1) == 1).all()


def test_dimension_mismatch(net):
    d, c, w = net
    with pytest.raises(DimensionMismatch):
        rnn_step(w, np.zeros(100))


def test_batch_step_matches_single(net):
    d, c, w = net
    zs = np.stack([c.q[0], c.q[3], c.b[2]], axis=1)
    out = rnn_step(w, zs)
    for k in range(3):
        assert np.array_equal(out[:, k], rnn_step(w, zs[:, k]))


def test_golden_walks_ideal(net):
    d, c, w = net
    r = run_walk(w, c, d, "1000100")
    assert r.final == "q22" and r.success
    assert r.trace == ["q1", "q2", "q4", "q8", "q17", "q11", "q22"]
    assert run_walk(w, c, d, "1011100").final == "q0"
    empty = run_walk(w, c, d, "")
    assert empty.final == "q0" and empty.success


def test_binarized_walk(net):
    d, c, w = net
    wb = binarize_stochastic(w, 2.0, np.random.default_rng(1))
    assert run_walk(wb, c, d, "1000100").final == "q22"


@pytest.mark.xfail(strict=True, reason="noisy 1-bit weights do not hold the moddiv-23 attractors at N=2048 "
                                       "(analysis in the decisions ledger)")
def test_noisy_binarized_walk(net):
    d, c, w = net
    r = np.random.default_rng(1)
    wn = add_weight_noise(binarize_stochastic(w, 2.0, r), 0.5, r)
    assert run_walk(wn, c, d, "1000100").final == "q22"


@pytest.mark.parametrize("on,off", [(5, 5), (10, 10), (5, 50), (50, 5), (25, 40)])
def test_timing_invariance(on, off):
    d = gen_moddiv_dfa(7)
    c = make_codebook(d, 1024, 8, np.random.default_rng(2))
    w = build_weights(d, c)
    words = [list(np.random.default_rng(k).choice(["s0", "s1"], 6)) for k in range(8)]
    assert all(r.success for r in run_walks(w, c, d, words, on, off))


def test_batched_walks_match_single(net):
    d, c, w = net
    rr = np.random.default_rng(3)
    words = [list(rr.choice(["s0", "s1"], 5)) for _ in range(6)]
    batch = run_walks(w, c, d, words)
    for wd, r in zip(words, batch):
        assert r.final == run_walk(w, c, d, wd).final
        assert r.expected == dfa_walk(d, wd)


def test_input_schedule():
    s = InputSchedule.for_word(["a", "b"], 3, 4)
    assert s.segments == [("a", 3), (None, 4), ("b", 3), (None, 4)] and s.total_steps == 14
    with pytest.raises(ValueError):
        InputSchedule([("a", 0)])


@given(st.integers(0, 2**32 - 1))
def test_attractor_only_relaxation(seed):
    r = np.random.default_rng(seed)
    n, l = 128, 8
    pats = np.stack([gen_sbc(n, l, r).data for _ in range(4)])
    w = build_attractor_weights(pats, l, 1 / l)
    z0 = gen_sbc(n, l, r).data
    z, steps, status = relax(w, z0, mode="sync")
    assert status in ("fixed", "cycle2") and steps <= n
    za, steps, status = relax(w, z0, mode="async")
    assert status == "fixed"
    assert np.array_equal(rnn_step_async(w, za), za)


def block_length_oracle(n):
    target = 8 * (n / 2048) * (math.log(2048) / math.log(n))
    best = None
    for d in range(n, 0, -1):  # larger divisors first, so ties keep the larger one
        if n % d == 0 and (best is None or abs(d - target) < abs(best - target)):
            best = d
    return best


@pytest.mark.parametrize("n", [256, 512, 1000, 1024, 2048, 4096, 3000])
def test_block_length(n):
    assert block_length_for(n) == block_length_oracle(n)
    assert n % block_length_for(n) == 0
    assert block_length_for(2048) == 8


def test_geometric_grid():
    g = geometric_grid(2, 200, 1.1)
    assert g[0] == 2 and g[-1] <= 200 and g == sorted(set(g))
    assert all(b / a <= 1.6 for a, b in zip(g, g[1:]))


def test_capacity_extremes():
    rows = capacity_sweep([1024], [4], 10, "ideal", seed=1)
    assert success_rate(rows, 1024, 4, "ideal") == 1.0
    assert p_max_from_rows(rows, 1024, "ideal") == 4
    rows = capacity_sweep([256], [300], 3, "ideal", seed=1)
    assert success_rate(rows, 256, 300, "ideal") == 0.0


def test_capacity_trial_deterministic():
    assert run_capacity_trial(512, 5, "binary", 99) == run_capacity_trial(512, 5, "binary", 99)
    with pytest.raises(ValueError):
        run_capacity_trial(512, 5, "bogus", 0)


def test_search_matches_full_sweep():
    grid = geometric_grid(2, 30, 1.3)
    pm, rows = search_p_max(512, "ideal", grid, trials=10, seed=4)
    full = capacity_sweep([512], grid, 10, "ideal", seed=4)
    # bisection assumes monotone success; compare with the largest P whose prefix all passes
    ok = [success_rate(full, 512, p, "ideal") >= 0.9 for p in grid]
    prefix = 0
    for p, good in zip(grid, ok):
        if not good:
            break
        prefix = p
    if ok == sorted(ok, reverse=True):
        assert pm == prefix
    assert {r.p for r in rows} <= set(grid)


def test_fit_scaling_exact_line():
    ns = [512, 1024, 2048, 4096]
    x = [n * n / math.log(n) ** 2 for n in ns]
    fit = fit_scaling(ns, [0.01 * v + 3 for v in x])
    assert fit.r2 == pytest.approx(1.0) and fit.slope == pytest.approx(0.01)


def test_csv_outputs(tmp_path):
    rows = capacity_sweep([256], [3, 2], 2, "ideal", seed=0)
    write_sweep_csv(rows, tmp_path / "s.csv")
    with open(tmp_path / "s.csv") as fh:
        data = list(csv.reader(fh))
    assert data[0] == ["n", "l", "p", "weight_mode", "trial", "seed", "success"]
    assert [r[2] for r in data[1:]] == ["2", "2", "3", "3"]
    write_summary_csv({512: (4, 0), 1024: (8, 2)}, tmp_path / "m.csv")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines == ["n,p_max_ideal,p_max_binary,ratio", "512,4,0,inf", "1024,8,2,4"]
