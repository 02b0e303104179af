"""Pure numpy LIF segment integrator.

Arithmetic is written in the same operation order as the compiled kernel so
both produce bit-identical traces.
"""
from __future__ import annotations

import numpy as np


def simulate(u, i_syn, j_syn, ref, wt, mask, ext, n_steps, dt, tau_m, u_rest, u_theta,
             u_reset, c_mem, tau_syn, coef, ref_steps, l, drive=None):
    """Advance the network ``n_steps`` Euler steps, mutating the state arrays.

    Per step: integrate u (old I), I (old J), J; clamp refractory neurons;
    threshold; block WTA with block-wide reset; clamp masked neurons;
    deliver the recurrent drive of this step's spikes into J.

    ``drive(spikes) -> currents`` replaces the in-memory row sum over ``wt``
    when given.  Returns (step offsets, neuron ids) of the emitted spikes.
    """
    allowed = np.asarray(mask) != 0
    blocked = ~allowed
    any_blocked = bool(blocked.any())
    out_s: list[int] = []
    out_n: list[int] = []
    for k in range(int(n_steps)):
        du = (u_rest - u) / tau_m + (i_syn + ext) / c_mem
        di = (j_syn - i_syn) / tau_syn
        dj = (-j_syn) / tau_syn
        u += dt * du
        i_syn += dt * di
        j_syn += dt * dj

        r = ref > 0
        if r.any():
            u[r] = u_reset
            ref[r] -= 1
        cand = (u > u_theta) & allowed & ~r
        spikes = None
        if cand.any():
            idx = np.flatnonzero(cand)
            blocks = idx // l
            winners = []
            for b in np.unique(blocks):
                sel = idx[blocks == b]
                winners.append(int(sel[np.argmax(u[sel])]))
            for w in winners:
                b0 = (w // l) * l
                u[b0:b0 + l] = u_reset
                ref[b0:b0 + l] = ref_steps
            spikes = winners
        if any_blocked:
            u[blocked] = u_reset
        if spikes:
            if drive is None:
                d = wt[spikes[0]].copy()
                for s in spikes[1:]:
                    d += wt[s]
            else:
                d = np.asarray(drive(spikes), dtype=np.float64)
            j_syn += coef * d
            out_s.extend([k] * len(spikes))
            out_n.extend(spikes)
    return np.asarray(out_s, dtype=np.int64), np.asarray(out_n, dtype=np.int64)
