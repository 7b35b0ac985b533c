# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; mirror _pykernels.py operation for operation."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, INFINITY

cnp.import_array()

ELOND = 0
LOND = 1
RLOND_BY = 2
URLOND_BY = 3


cdef inline double _inv(double x) nogil:
    if x == 0.0:
        return INFINITY
    return 1.0 / x


def lond_family_run(values, gammas, ells, double alpha, int mode, uniforms=None):
    cdef double[::1] vals = np.ascontiguousarray(values, dtype=np.float64)
    cdef double[::1] gam = np.ascontiguousarray(gammas, dtype=np.float64)
    cdef double[::1] ell = np.ascontiguousarray(ells, dtype=np.float64)
    cdef double[::1] us
    cdef bint have_u = uniforms is not None
    if have_u:
        us = np.ascontiguousarray(uniforms, dtype=np.float64)
    elif mode == URLOND_BY:
        raise ValueError("Ur-LOND needs uniform draws")
    if mode < 0 or mode > 3:
        raise ValueError(f"unknown mode {mode}")
    cdef Py_ssize_t n = vals.shape[0], k
    levels = np.empty(n, dtype=np.float64)
    rejected = np.zeros(n, dtype=np.bool_)
    cdef double[::1] lv = levels
    cdef cnp.npy_bool[::1] rj = rejected
    cdef long r = 0
    cdef double ag, lev, kk
    cdef bint rej
    with nogil:
        for k in range(n):
            ag = alpha * gam[k]
            if mode == 0:
                lev = ag * (r + 1)
                if have_u:
                    lev = lev / us[k]
                rej = vals[k] >= _inv(lev)
            elif mode == 1:
                lev = ag * (r + 1)
                rej = vals[k] <= lev
            elif mode == 2:
                kk = floor(<double>(r + 1))
                if kk > k + 1:
                    kk = k + 1
                lev = ag * (kk / ell[k])
                rej = vals[k] <= lev
            else:
                kk = floor((r + 1) / us[k])
                if kk > k + 1:
                    kk = k + 1
                lev = ag * (kk / ell[k])
                rej = vals[k] <= lev
            lv[k] = lev
            rj[k] = rej
            r += rej
    return levels, rejected


def lordstar_run(pvalues, gammas, double alpha, double w0, long lag):
    cdef double[::1] p = np.ascontiguousarray(pvalues, dtype=np.float64)
    cdef double[::1] gam = np.ascontiguousarray(gammas, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0], k, m
    levels = np.empty(n, dtype=np.float64)
    rejected = np.zeros(n, dtype=np.bool_)
    cdef double[::1] lv = levels
    cdef cnp.npy_bool[::1] rj = rejected
    cdef long[::1] ridx = np.zeros(max(n, 1), dtype=np.int_)
    cdef long nrej = 0, t, r1, i
    cdef double s, lev
    with nogil:
        for k in range(n):
            t = k + 1
            s = w0 * gam[t - 1]
            if nrej > 0:
                r1 = ridx[0]
                if not (t - lag <= r1 and r1 <= t - 1):
                    s += (alpha - w0) * gam[t - r1 - 1]
                for m in range(1, nrej):
                    i = ridx[m]
                    if not (t - lag <= i and i <= t - 1):
                        s += gam[t - i - 1]
            lev = alpha * s
            if lev < 0.0:
                lev = 0.0
            lv[k] = lev
            if p[k] <= lev:
                rj[k] = True
                ridx[nrej] = t
                nrej += 1
    return levels, rejected


def coupled_stopping(wealth, ag):
    cdef double[:, ::1] W = np.ascontiguousarray(wealth, dtype=np.float64)
    cdef double[::1] agv = np.ascontiguousarray(ag, dtype=np.float64)
    cdef Py_ssize_t T = W.shape[0], N = W.shape[1], i, k
    tau_arr = np.full(T, N, dtype=np.int64)
    cdef cnp.int64_t[::1] tau = tau_arr
    cdef cnp.npy_bool[::1] stopped = np.zeros(T, dtype=np.bool_)
    cdef double[::1] frozen = np.zeros(T, dtype=np.float64)
    cdef long cnt
    cdef double inv, v
    with nogil:
        for i in range(N):
            cnt = 0
            for k in range(T):
                inv = _inv(agv[k] * (cnt + 1))
                if stopped[k]:
                    v = frozen[k]
                else:
                    v = W[k, i]
                    if v >= inv:
                        stopped[k] = True
                        tau[k] = i + 1
                        frozen[k] = v
                if v >= inv:
                    cnt += 1
    return tau_arr


def wcs_evalues(below, wtest, double wtotal, gammas, double alpha):
    cdef double[::1] A = np.ascontiguousarray(below, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(wtest, dtype=np.float64)
    cdef double[::1] gam = np.ascontiguousarray(gammas, dtype=np.float64)
    cdef Py_ssize_t T = A.shape[0], t, j
    P_arr = np.empty(T, dtype=np.float64)
    E_arr = np.empty(T, dtype=np.float64)
    lm_arr = np.empty(T, dtype=np.float64)
    lp_arr = np.empty(T, dtype=np.float64)
    cdef double[::1] P = P_arr
    cdef double[::1] E = E_arr
    cdef double[::1] lm = lm_arr
    cdef double[::1] lp = lp_arr
    cdef long rm, rp
    cdef double wt, denom, am, ap, pt
    with nogil:
        for t in range(T):
            wt = w[t]
            denom = wtotal + wt
            rm = 0
            rp = 0
            for j in range(t):
                if A[j] / denom <= alpha * gam[j] * (rm + 1):
                    rm += 1
                if (A[j] + wt) / denom <= alpha * gam[j] * (rp + 1):
                    rp += 1
            am = alpha * gam[t] * (rm + 1)
            ap = alpha * gam[t] * (rp + 1)
            pt = (A[t] + wt) / denom
            P[t] = pt
            lm[t] = am
            lp[t] = ap
            if pt <= ap:
                E[t] = _inv(am)
            else:
                E[t] = 0.0
    return P_arr, E_arr, lm_arr, lp_arr
