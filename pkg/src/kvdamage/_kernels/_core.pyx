# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled element kernels.

Mirrors kvdamage._kernels.python function for function; see that module
for the shape conventions.  Element counts dominate the cost, so the
loops run over elements with the small per-element blocks unrolled by
plain nested loops (k_n <= 3, k_u <= 6, n_s <= 3, n_q <= 5).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport pow

cnp.import_array()


def elastic_terms(bmat, btcb, vols, qw, qN, cmat, u_e, g_q, gp_q, gpp_q,
                  bint want_value, bint want_grad, bint want_hess):
    """Degraded elastic energy 1/2 gamma(alpha) C e(u):e(u) and derivatives."""
    cdef double[:, :, ::1] B = np.ascontiguousarray(bmat)
    cdef double[:, ::1] C = np.ascontiguousarray(cmat)
    cdef double[:, ::1] U = np.ascontiguousarray(u_e)
    cdef double[:, ::1] G = np.ascontiguousarray(g_q)
    cdef double[::1] V = np.ascontiguousarray(vols)
    cdef double[::1] W = np.ascontiguousarray(qw)
    cdef double[:, ::1] N = np.ascontiguousarray(qN)

    cdef Py_ssize_t n_e = B.shape[0]
    cdef Py_ssize_t n_s = B.shape[1]
    cdef Py_ssize_t k_u = B.shape[2]
    cdef Py_ssize_t n_q = W.shape[0]
    cdef Py_ssize_t k_n = N.shape[1]
    if n_s > 3 or k_u > 6 or k_n > 3:
        raise ValueError("element block larger than the P1 simplex layout")

    cdef double[:, :, ::1] T
    cdef double[:, ::1] GP
    cdef double[:, ::1] GPP

    cdef object out_gu = None, out_ga = None
    cdef object out_kuu = None, out_kua = None, out_kaa = None
    cdef double[:, ::1] gu
    cdef double[:, ::1] ga
    cdef double[:, :, ::1] kuu
    cdef double[:, :, ::1] kua
    cdef double[:, :, ::1] kaa

    cdef bint need_grad = want_grad
    cdef bint need_hess = want_hess
    if need_grad:
        out_gu = np.empty((n_e, k_u))
        out_ga = np.empty((n_e, k_n))
        gu = out_gu
        ga = out_ga
    if need_hess:
        T = np.ascontiguousarray(btcb)
        GPP = np.ascontiguousarray(gpp_q)
        out_kuu = np.empty((n_e, k_u, k_u))
        out_kua = np.empty((n_e, k_u, k_n))
        out_kaa = np.empty((n_e, k_n, k_n))
        kuu = out_kuu
        kua = out_kua
        kaa = out_kaa
    if need_grad or need_hess:
        GP = np.ascontiguousarray(gp_q)

    cdef double energy = 0.0
    cdef double es[3]
    cdef double ss[3]
    cdef double bts[6]
    cdef double dbar[3]
    cdef double q, gbar, wv, acc
    cdef Py_ssize_t e, s, r, k, l, i, j, iq

    for e in range(n_e):
        q = 0.0
        for s in range(n_s):
            acc = 0.0
            for k in range(k_u):
                acc += B[e, s, k] * U[e, k]
            es[s] = acc
        for s in range(n_s):
            acc = 0.0
            for r in range(n_s):
                acc += C[s, r] * es[r]
            ss[s] = acc
            q += es[s] * ss[s]
        gbar = 0.0
        for iq in range(n_q):
            gbar += W[iq] * G[e, iq]
        wv = V[e] * gbar
        if want_value:
            energy += 0.5 * wv * q

        if need_grad or need_hess:
            for i in range(k_n):
                acc = 0.0
                for iq in range(n_q):
                    acc += W[iq] * GP[e, iq] * N[iq, i]
                dbar[i] = acc
            for k in range(k_u):
                acc = 0.0
                for s in range(n_s):
                    acc += B[e, s, k] * ss[s]
                bts[k] = acc
        if need_grad:
            for k in range(k_u):
                gu[e, k] = wv * bts[k]
            for i in range(k_n):
                ga[e, i] = 0.5 * V[e] * q * dbar[i]
        if need_hess:
            for k in range(k_u):
                for l in range(k_u):
                    kuu[e, k, l] = T[e, k, l] * wv
                for i in range(k_n):
                    kua[e, k, i] = V[e] * bts[k] * dbar[i]
            for i in range(k_n):
                for j in range(k_n):
                    acc = 0.0
                    for iq in range(n_q):
                        acc += W[iq] * GPP[e, iq] * N[iq, i] * N[iq, j]
                    kaa[e, i, j] = 0.5 * V[e] * q * acc

    return (energy if want_value else None, out_gu, out_ga,
            out_kuu, out_kua, out_kaa)


def plap_terms(gmat, vols, a_e, double kappa, double p, double eps_g,
               double guard, bint want_value, bint want_grad, bint want_hess):
    """Damage gradient energy and derivatives."""
    cdef double[:, :, ::1] D = np.ascontiguousarray(gmat)
    cdef double[:, ::1] A = np.ascontiguousarray(a_e)
    cdef double[::1] V = np.ascontiguousarray(vols)

    cdef Py_ssize_t n_e = D.shape[0]
    cdef Py_ssize_t n_d = D.shape[1]
    cdef Py_ssize_t k_n = D.shape[2]
    if n_d > 3 or k_n > 3:
        raise ValueError("element block larger than the P1 simplex layout")

    cdef object out_res = None, out_jac = None
    cdef double[:, ::1] res
    cdef double[:, :, ::1] jac
    if want_grad:
        out_res = np.empty((n_e, k_n))
        res = out_res
    if want_hess:
        out_jac = np.empty((n_e, k_n, k_n))
        jac = out_jac

    cdef double energy = 0.0
    cdef double g[3]
    cdef double gg[3]
    cdef double m2, t, pw, e_p, curv, dens, wfac, cfac, acc
    cdef double gp = guard * guard
    cdef Py_ssize_t e, d, k, l

    for e in range(n_e):
        m2 = 0.0
        for d in range(n_d):
            acc = 0.0
            for k in range(k_n):
                acc += D[e, d, k] * A[e, k]
            g[d] = acc
            m2 += acc * acc

        if p == 2.0:
            pw = 1.0
            e_p = 0.5 * m2
            curv = 0.0
        else:
            t = m2 + gp
            pw = pow(t, (p - 2.0) / 2.0)
            e_p = (pow(t, p / 2.0) - pow(guard, p)) / p
            curv = (p - 2.0) * pow(t, (p - 4.0) / 2.0)

        if eps_g == 0.0:
            dens = kappa * e_p
            wfac = kappa * pw
            cfac = kappa * curv
        else:
            dens = kappa * (0.5 * m2 + eps_g * e_p)
            wfac = kappa * (1.0 + eps_g * pw)
            cfac = kappa * eps_g * curv

        if want_value:
            energy += V[e] * dens
        if want_grad or want_hess:
            for k in range(k_n):
                acc = 0.0
                for d in range(n_d):
                    acc += D[e, d, k] * g[d]
                gg[k] = acc
        if want_grad:
            for k in range(k_n):
                res[e, k] = V[e] * wfac * gg[k]
        if want_hess:
            for k in range(k_n):
                for l in range(k_n):
                    acc = 0.0
                    for d in range(n_d):
                        acc += D[e, d, k] * D[e, d, l]
                    jac[e, k, l] = V[e] * (wfac * acc + cfac * gg[k] * gg[l])

    return energy if want_value else None, out_res, out_jac


def scalar_field_terms(vols, qw, qN, f_q, fp_q, fpp_q,
                       bint want_value, bint want_grad, bint want_hess):
    """Integral of a pointwise function of alpha and its nodal derivatives."""
    cdef double[::1] V = np.ascontiguousarray(vols)
    cdef double[::1] W = np.ascontiguousarray(qw)
    cdef double[:, ::1] N = np.ascontiguousarray(qN)

    cdef Py_ssize_t n_e = V.shape[0]
    cdef Py_ssize_t n_q = W.shape[0]
    cdef Py_ssize_t k_n = N.shape[1]

    cdef double[:, ::1] F
    cdef double[:, ::1] FP
    cdef double[:, ::1] FPP

    cdef object out_grad = None, out_hess = None
    cdef double[:, ::1] grad
    cdef double[:, :, ::1] hess
    cdef double value = 0.0
    cdef double acc
    cdef Py_ssize_t e, i, j, iq

    if want_value:
        F = np.ascontiguousarray(f_q)
        for e in range(n_e):
            acc = 0.0
            for iq in range(n_q):
                acc += W[iq] * F[e, iq]
            value += V[e] * acc
    if want_grad:
        FP = np.ascontiguousarray(fp_q)
        out_grad = np.empty((n_e, k_n))
        grad = out_grad
        for e in range(n_e):
            for i in range(k_n):
                acc = 0.0
                for iq in range(n_q):
                    acc += W[iq] * FP[e, iq] * N[iq, i]
                grad[e, i] = V[e] * acc
    if want_hess:
        FPP = np.ascontiguousarray(fpp_q)
        out_hess = np.empty((n_e, k_n, k_n))
        hess = out_hess
        for e in range(n_e):
            for i in range(k_n):
                for j in range(k_n):
                    acc = 0.0
                    for iq in range(n_q):
                        acc += W[iq] * FPP[e, iq] * N[iq, i] * N[iq, j]
                    hess[e, i, j] = V[e] * acc

    return value if want_value else None, out_grad, out_hess
