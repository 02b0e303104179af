# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled LIF segment integrator; mirrors fsma._fallback.simulate operation by operation."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def simulate(double[::1] u, double[::1] i_syn, double[::1] j_syn, int[::1] ref,
             const double[:, ::1] wt, const signed char[::1] mask, const double[::1] ext,
             long n_steps, double dt, double tau_m, double u_rest, double u_theta,
             double u_reset, double c_mem, double tau_syn, double coef, int ref_steps,
             int l, drive=None):
    if drive is not None:
        raise ValueError("the compiled kernel only supports in-memory weights")
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t m = n // l
    cdef Py_ssize_t i, b, b0, k, best, nsp
    cdef double du, di, dj, bestu
    cdef bint any_blocked = False
    cdef double[::1] d = np.zeros(n)
    cdef long[::1] spk = np.zeros(m, dtype=np.int64)
    cdef unsigned char[::1] was_ref = np.zeros(n, dtype=np.uint8)
    out_s = []
    out_n = []

    for i in range(n):
        if mask[i] == 0:
            any_blocked = True
            break

    for k in range(n_steps):
        for i in range(n):
            du = (u_rest - u[i]) / tau_m + (i_syn[i] + ext[i]) / c_mem
            di = (j_syn[i] - i_syn[i]) / tau_syn
            dj = (-j_syn[i]) / tau_syn
            u[i] = u[i] + dt * du
            i_syn[i] = i_syn[i] + dt * di
            j_syn[i] = j_syn[i] + dt * dj
            if ref[i] > 0:
                u[i] = u_reset
                ref[i] -= 1
                was_ref[i] = 1
            else:
                was_ref[i] = 0

        nsp = 0
        for b in range(m):
            b0 = b * l
            best = -1
            bestu = 0.0
            for i in range(b0, b0 + l):
                if u[i] > u_theta and mask[i] != 0 and not was_ref[i]:
                    if best < 0 or u[i] > bestu:
                        best = i
                        bestu = u[i]
            if best >= 0:
                spk[nsp] = best
                nsp += 1
                for i in range(b0, b0 + l):
                    u[i] = u_reset
                    ref[i] = ref_steps

        if any_blocked:
            for i in range(n):
                if mask[i] == 0:
                    u[i] = u_reset

        if nsp > 0:
            for i in range(n):
                d[i] = wt[spk[0], i]
            for b in range(1, nsp):
                for i in range(n):
                    d[i] += wt[spk[b], i]
            for i in range(n):
                j_syn[i] = j_syn[i] + coef * d[i]
            for b in range(nsp):
                out_s.append(k)
                out_n.append(spk[b])

    return np.asarray(out_s, dtype=np.int64), np.asarray(out_n, dtype=np.int64)
