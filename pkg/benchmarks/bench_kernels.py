"""Compiled vs numpy SNN kernel: wall time and bit-identity of the spike trains.

    python benchmarks/bench_kernels.py [--n 2048] [--word 1000100] [--repeat 3]
"""
import argparse
import time

import numpy as np

from fsma import kernels
from fsma.experiments import golden_network
from fsma.snn import run_snn, word_schedule


def timed(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=2048)
    ap.add_argument("--l", type=int, default=8)
    ap.add_argument("--word", default="1000100")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    d, c, w, p, _ = golden_network(0, {"binarize": 2.0}, args.n, args.l)
    sched = word_schedule(d.resolve_word(args.word))
    print(f"N={args.n} L={args.l} simulated {sched.duration:.0f} ms ({p.steps(sched.duration)} steps)")
    results = {}
    for backend in ("cython", "python"):
        if backend == "cython" and kernels.BACKEND != "cython":
            print("cython: extension not built, skipped")
            continue
        dt, tr = timed(lambda: run_snn(p, w, c, d, sched, np.random.default_rng(1), backend=backend), args.repeat)
        results[backend] = (dt, tr)
        print(f"{backend:7s} {dt:8.3f} s  {tr.times.size} spikes")
    if len(results) == 2:
        a, b = results["cython"][1], results["python"][1]
        same = np.array_equal(a.times, b.times) and np.array_equal(a.neurons, b.neurons)
        print(f"speedup {results['python'][0] / results['cython'][0]:.1f}x, spike trains identical: {same}")


if __name__ == "__main__":
    main()
