import json
import math

import numpy as np
import pytest

from fsma import kernels
from fsma.compiler import make_codebook
from fsma.config import SeedStreams
from fsma.dfa import gen_moddiv_dfa, two_input_dfa
from fsma.experiments import InvariantViolation, audit_block_sparsity, crossbar_network, golden_network, snn_walk
from fsma.snn import (KickParams, NeuronArray, Rates, SimParams, SpikeSchedule, SpikeTrace, alpha_kernel,
                      calibrate_w_scale, decode_walk, random_timing_schedule, readout_rates, run_snn, snn_step,
                      word_schedule, write_rates_csv, write_spikes_csv, write_walk_json, wta_enforce)


def test_default_params_match_table():
    p = SimParams()
    assert (p.dt, p.tau_m, p.u_theta, p.u_rest, p.u_reset, p.c_mem) == (0.05, 20.0, 20.0, 25.0, 0.0, 1.0)
    assert (p.tau_syn, p.tau_ref, p.tau_readout) == (20.0, 10.0, 10.0)
    assert p.ref_steps == 200


def test_param_validation():
    with pytest.raises(ValueError):
        SimParams(tau_m=0)
    with pytest.raises(ValueError):
        SimParams(dt=5.0)
    with pytest.raises(ValueError):
        SimParams(n=10, l=4)


def test_intrinsic_drive_threshold_time():
    p = SimParams(n=1, l=1)
    nr = NeuronArray.resting(1)
    w = np.zeros((1, 1))
    t_spike = None
    for k in range(2000):
        if snn_step(p, nr, w).size:
            t_spike = (k + 1) * p.dt
            break
    # Euler solution of du/dt = (u_rest - u)/tau_m from 0: u_k = u_rest (1 - (1 - dt/tau)^k)
    k_cross = math.ceil(math.log(1 - p.u_theta / p.u_rest) / math.log(1 - p.dt / p.tau_m) + 1e-12)
    assert t_spike == pytest.approx(k_cross * p.dt)
    assert t_spike == pytest.approx(p.tau_m * math.log(p.u_rest / (p.u_rest - p.u_theta)), abs=0.1)


def test_single_spike_current_peak():
    w_scale, weight = 0.7, 2.0
    p = SimParams(n=2, l=1, u_rest=0.0, w_scale=w_scale)
    nr = NeuronArray.resting(2, [21.0, 0.0])
    w = np.array([[0.0, 0.0], [weight, 0.0]])  # w[post, pre]
    mask = np.array([1, 0], dtype=np.int8)
    cur = []
    for _ in range(int(60 / p.dt)):
        snn_step(p, nr, w, mask)
        cur.append(nr.i_syn[1])
    cur = np.array(cur)
    peak_t = (np.argmax(cur) + 1) * p.dt
    assert cur.max() == pytest.approx(w_scale * weight * math.exp(-1) / p.tau_syn, rel=5e-3)
    assert peak_t == pytest.approx(p.tau_syn, abs=0.2)


def test_masked_neuron_silent():
    p = SimParams(n=2, l=1)
    nr = NeuronArray.resting(2, [30.0, 30.0])
    out = snn_step(p, nr, np.zeros((2, 2)), mask=np.array([0, 1], dtype=np.int8))
    assert list(out) == [1]
    assert nr.u[0] == p.u_reset


def test_block_wta_tie_rules():
    p = SimParams(n=8, l=4)
    nr = NeuronArray.resting(8, [21.0, 23.0, 22.0, 5.0, 10.0, 10.0, 10.0, 10.0])
    out = snn_step(p, nr, np.zeros((8, 8)))
    assert list(out) == [1]
    assert (nr.u[:4] == p.u_reset).all() and (nr.ref[:4] == p.ref_steps).all()
    assert (nr.u[4:] > 10.0).all() and (nr.ref[4:] == 0).all()
    nr = NeuronArray.resting(8, [21.0, 21.0, 0.0, 0.0, 21.0, 0.0, 0.0, 21.0])
    assert list(snn_step(p, nr, np.zeros((8, 8)))) == [0, 4]


def test_wta_enforce():
    p = SimParams(n=8, l=4)
    nr = NeuronArray.resting(8, np.full(8, 15.0))
    wta_enforce(p, nr, [6])
    assert (nr.u[4:] == 0).all() and (nr.ref[4:] == p.ref_steps).all() and (nr.u[:4] == 15).all()


def test_refractory_blocks_spiking():
    p = SimParams(n=4, l=4)
    nr = NeuronArray.resting(4, [25.0, 0, 0, 0])
    snn_step(p, nr, np.zeros((4, 4)))
    nr.u[:] = 30.0
    for _ in range(p.ref_steps - 1):
        assert snn_step(p, nr, np.zeros((4, 4))).size == 0
        nr.u[:] = 30.0


def test_non_finite_aborts():
    p = SimParams(n=2, l=1)
    nr = NeuronArray.resting(2, [0.0, np.nan])
    with pytest.raises(FloatingPointError):
        snn_step(p, nr, np.zeros((2, 2)))


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="extension not built")
def test_backends_bit_identical():
    rr = np.random.default_rng(0)
    d = gen_moddiv_dfa(5)
    c = make_codebook(d, 256, 8, rr)
    w = rr.normal(size=(256, 256))
    p = SimParams(n=256, l=8, w_scale=0.3)
    sched = word_schedule(["s1", "s0"], 50, 50, 50)
    a = run_snn(p, w, c, d, sched, np.random.default_rng(3), backend="cython")
    b = run_snn(p, w, c, d, sched, np.random.default_rng(3), backend="python")
    assert a.times.size > 100
    assert np.array_equal(a.times, b.times) and np.array_equal(a.neurons, b.neurons)


def test_alpha_kernel_unit_area():
    k = alpha_kernel(10.0, 0.5)
    assert k.sum() * 0.5 == pytest.approx(1.0)
    assert np.argmax(k) * 0.5 == pytest.approx(10.0, abs=0.5)


def _sched(ms):
    return SpikeSchedule([(None, ms)])


def test_readout_zero_spikes(rng):
    c = make_codebook(gen_moddiv_dfa(3), 64, 8, rng)
    tr = SpikeTrace(np.zeros(0), np.zeros(0, dtype=np.int64), 100.0, _sched(100.0), 64)
    r = readout_rates(tr, c)
    assert not r.m.any() and not r.nu.any() and r.m.shape == (6, 100)


def test_readout_in_state_rates():
    rr = np.random.default_rng(8)
    d = gen_moddiv_dfa(5)
    n, l = 4096, 8
    c = make_codebook(d, n, l, rr)
    active = np.flatnonzero(c.q[0])
    rate = 0.05  # spikes/ms per active neuron
    dur = 400.0
    times, neurons = [], []
    for i, nrn in enumerate(active):
        ts = np.arange((i % 20) + 0.5, dur, 1 / rate)
        times.append(ts)
        neurons.append(np.full(ts.size, nrn))
    t, nn = np.concatenate(times), np.concatenate(neurons)
    o = np.argsort(t, kind="stable")
    tr = SpikeTrace(t[o], nn[o], dur, _sched(dur), n)
    r = readout_rates(tr, c)
    late = r.t > 150
    nu = r.nu[late].mean()
    assert nu == pytest.approx(rate, rel=0.02)
    assert r.row("q0")[late].mean() == pytest.approx(nu, rel=1e-9)
    others = [r.row(q)[late].mean() / nu for q in d.states[1:]]
    # off-state overlap with a random SBC is Binomial(M, 1/L)/M
    m = n // l
    assert abs(np.mean(others) - 1 / l) < 4 * math.sqrt((1 / l) * (1 - 1 / l) / (m * len(others)))


def test_decode_walk_synthetic():
    c = make_codebook(gen_moddiv_dfa(3), 48, 8, np.random.default_rng(0))
    sched = SpikeSchedule([(None, 10.0), ("s1", 10.0), (None, 10.0)])
    t = np.arange(30.0)
    m = np.zeros((6, 30))
    m[0, :10] = 1.0
    m[1, 20:] = 1.0
    m[2, 20:] = 0.3
    nu = np.ones(30)
    dec = decode_walk(Rates(t, [*c.states, *("b:" + q for q in c.states)], m, nu), c, sched)
    assert dec.gap_states == ["q0", "q1"] and dec.final == "q1"
    assert dec.entries == [{"state": "q0", "t_enter_ms": 0.0}, {"state": "q1", "t_enter_ms": 20.0}]
    m[1, 20:] = 0.4
    dec = decode_walk(Rates(t, [*c.states, *("b:" + q for q in c.states)], m, nu), c, sched)
    assert dec.final is None


def test_schedules(rng):
    s = word_schedule(["a", "b"], 200, 100, 400)
    assert s.segments == [(None, 400), ("a", 200), (None, 100), ("b", 200), (None, 100)]
    assert s.duration == 1000 and s.bounds()[2] == (None, 600, 700)
    r = random_timing_schedule(["a"] * 20, rng, 200, 1000)
    assert all(200 <= ms <= 1000 for _, ms in r.segments[1:])
    with pytest.raises(ValueError):
        SpikeSchedule([("a", 0.0)])


def test_block_sparsity_audit():
    ok = SpikeTrace(np.array([0.0, 5.0, 10.0]), np.array([0, 9, 1]), 20.0, _sched(20.0), 16)
    audit_block_sparsity(ok, 8, 10.0, 0.05)
    bad = SpikeTrace(np.array([0.0, 5.0]), np.array([0, 1]), 20.0, _sched(20.0), 16)
    with pytest.raises(InvariantViolation):
        audit_block_sparsity(bad, 8, 10.0, 0.05)


def test_output_files(tmp_path, rng):
    c = make_codebook(gen_moddiv_dfa(2), 16, 8, rng)
    tr = SpikeTrace(np.array([0.05, 1.5]), np.array([3, 12]), 3.0, _sched(3.0), 16)
    write_spikes_csv(tr, tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines() == ["t_ms,neuron", "0.0500,3", "1.5000,12"]
    r = readout_rates(tr, c)
    write_rates_csv(r, tmp_path / "r.csv")
    head = (tmp_path / "r.csv").read_text().splitlines()
    assert head[0] == "t_ms,q0,q1,b:q0,b:q1" and len(head) == 4
    dec = decode_walk(r, c, tr.schedule)
    write_walk_json(dec, tmp_path / "w.json")
    assert isinstance(json.loads((tmp_path / "w.json").read_text()), list)


def test_calibrate_w_scale():
    assert calibrate_w_scale(np.array([[1.0, -3.0]]), 0.1) == pytest.approx(0.05)
    with pytest.raises(ValueError):
        calibrate_w_scale(np.zeros((2, 2)))


# -- network-level behaviour (N=2048, a few seconds each) ----------------------

@pytest.fixture(scope="module")
def ideal_net():
    return golden_network(0, {})


@pytest.fixture(scope="module")
def binary_net():
    return golden_network(0, {"binarize": 2.0})


@pytest.mark.parametrize("net", ["ideal_net", "binary_net"])
def test_golden_walks(net, request):
    d, c, w, p, st = request.getfixturevalue(net)
    for word, final in (("1000100", "q22"), ("1011100", "q0")):
        r = snn_walk(p, w, c, d, word, st.rng("noise"))
        assert r.success and r.decoded.final == final


def test_fixed_point_walk_from_ideal():
    d, c, w, p, st = golden_network(0, {"fixed_point": True})
    assert w.provenance == "fixed_point"
    r = snn_walk(p, w, c, d, "1000100", st.rng("noise"))
    assert r.decoded.final == "q22"


def test_dt_convergence(binary_net):
    d, c, w, p, st = binary_net
    half = SimParams(n=p.n, l=p.l, dt=p.dt / 2, w_scale=p.w_scale)
    for word in ("1000100", "1011100"):
        a = snn_walk(p, w, c, d, word, np.random.default_rng(4))
        b = snn_walk(half, w, c, d, word, np.random.default_rng(4))
        assert a.decoded.gap_states == b.decoded.gap_states == a.expected


def test_attractor_persistence(binary_net):
    d, c, w, p, st = binary_net
    sched = SpikeSchedule([(None, 400.0), ("s1", 200.0), (None, 1000.0)])
    tr = run_snn(p, w, c, d, sched, np.random.default_rng(5))
    r = readout_rates(tr, c)
    nq = len(c.states)
    win = (r.t >= 900) & (r.t < 1600)
    states = {c.states[int(np.argmax(r.m[:nq, j]))] for j in np.flatnonzero(win)}
    assert states == {"q1"}


def test_random_timing_walk(binary_net):
    d, c, w, p, st = binary_net
    sr = np.random.default_rng(6)
    r = snn_walk(p, w, c, d, "1101", st.rng("noise"), timing="random", sched_rng=sr)
    assert r.success


def test_invalid_input_leaves_state():
    d = two_input_dfa()
    c, w, p, _ = crossbar_network(d, SeedStreams(0))
    # b at q0 and a at q3 have no stored transition
    r = snn_walk(p, w, c, d, "baabab", np.random.default_rng(0))
    assert r.expected == ["q0", "q0", "q1", "q2", "q3", "q3", "q0"]
    assert r.success
