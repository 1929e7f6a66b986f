# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled stepping kernel: same chunk contract as _sim_numpy.advance_chunk.

Consumes the same pre-drawn normal layout, so trajectories agree with the
numpy kernel to floating-point reassociation (no reordering is performed).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, exp, expm1, sin, sqrt

cnp.import_array()


def advance_chunk(cnp.float64_t[:, ::1] z,
                  cnp.float64_t[:, :, ::1] normals,
                  cnp.int64_t[:, ::1] orders,
                  cnp.float64_t[::1] taus,
                  double dt, double gamma, double gamma_tilde,
                  double T_minus, double T_plus,
                  acc=None):
    cdef Py_ssize_t R = z.shape[0]
    cdef Py_ssize_t dim = z.shape[1]
    cdef Py_ssize_t n = (dim - 1) // 2
    cdef Py_ssize_t K = normals.shape[1]
    cdef double a_th = exp(-0.25 * gamma_tilde * dt)
    cdef double s_m = sqrt(T_minus * -expm1(-0.5 * gamma_tilde * dt))
    cdef double s_p = sqrt(T_plus * -expm1(-0.5 * gamma_tilde * dt))
    cdef double th_scale = sqrt(0.5 * gamma * dt)
    cdef double half, tau, c, s, a, b, pk, jv
    cdef Py_ssize_t rep, k, x, kk, idx

    cdef bint do_acc = acc is not None
    cdef cnp.float64_t[:, ::1] acc_r, acc_p, acc_pp, acc_rr
    cdef cnp.float64_t[:, ::1] acc_ppx, acc_prs, acc_prp, acc_j, acc_bnd
    if do_acc:
        acc_r = acc["r"]; acc_p = acc["p"]; acc_pp = acc["pp"]
        acc_rr = acc["rr"]; acc_ppx = acc["ppx"]; acc_prs = acc["prs"]
        acc_prp = acc["prp"]; acc_j = acc["j"]; acc_bnd = acc["bnd"]

    half = 0.5 * dt
    for rep in range(R):
        for k in range(K):
            tau = taus[k]
            # thermostat half step (exact OU over dt/2)
            z[rep, n] = a_th * z[rep, n] + s_m * normals[rep, k, 0]
            z[rep, dim - 1] = a_th * z[rep, dim - 1] + s_p * normals[rep, k, 1]
            # exchange sweep A (dt/2)
            for kk in range(n):
                idx = orders[k, kk]
                c = cos(th_scale * normals[rep, k, 2 + idx])
                s = sin(th_scale * normals[rep, k, 2 + idx])
                a = z[rep, n + idx]
                b = z[rep, n + idx + 1]
                z[rep, n + idx] = c * a - s * b
                z[rep, n + idx + 1] = s * a + c * b
            # velocity Verlet: kick / drift / kick
            z[rep, n] += half * z[rep, 0]
            for x in range(1, n):
                z[rep, n + x] += half * (z[rep, x] - z[rep, x - 1])
            z[rep, dim - 1] += half * (tau - z[rep, n - 1])
            for x in range(n):
                z[rep, x] += dt * (z[rep, n + x + 1] - z[rep, n + x])
            z[rep, n] += half * z[rep, 0]
            for x in range(1, n):
                z[rep, n + x] += half * (z[rep, x] - z[rep, x - 1])
            z[rep, dim - 1] += half * (tau - z[rep, n - 1])
            # exchange sweep B (reversed order)
            for kk in range(n - 1, -1, -1):
                idx = orders[k, kk]
                c = cos(th_scale * normals[rep, k, 2 + n + idx])
                s = sin(th_scale * normals[rep, k, 2 + n + idx])
                a = z[rep, n + idx]
                b = z[rep, n + idx + 1]
                z[rep, n + idx] = c * a - s * b
                z[rep, n + idx + 1] = s * a + c * b
            # thermostat half step
            z[rep, n] = a_th * z[rep, n] + s_m * normals[rep, k, 2 * n + 2]
            z[rep, dim - 1] = a_th * z[rep, dim - 1] + s_p * normals[rep, k, 2 * n + 3]

            if do_acc:
                for x in range(n + 1):
                    pk = z[rep, n + x]
                    acc_p[rep, x] += pk
                    acc_pp[rep, x] += pk * pk
                for x in range(n):
                    a = z[rep, x]                 # r_{x+1} site value
                    acc_r[rep, x] += a
                    acc_rr[rep, x] += a * a
                    b = z[rep, n + x]             # p_x
                    pk = z[rep, n + x + 1]        # p_{x+1}
                    acc_ppx[rep, x] += b * pk
                    acc_prs[rep, x] += pk * a
                    acc_prp[rep, x] += b * a
                    jv = -b * a + 0.5 * gamma * (b * b - pk * pk)
                    acc_j[rep, x] += jv
                pk = z[rep, n]
                acc_bnd[rep, 0] += 0.5 * gamma_tilde * (T_minus - pk * pk)
                pk = z[rep, dim - 1]
                acc_bnd[rep, 1] += (-0.5 * gamma_tilde * (T_plus - pk * pk)
                                    - tau * pk)
