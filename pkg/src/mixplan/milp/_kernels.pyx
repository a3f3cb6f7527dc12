# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simplex inner-loop kernels; see _kernels_py.py for the contract."""

from libc.math cimport fabs, INFINITY, isfinite

import numpy as np

DEF BASIC = 0
DEF AT_LOWER = 1
DEF AT_UPPER = 2
DEF FREE = 3
DEF HARRIS_TOL = 1e-9


def price(const double[::1] d, const signed char[::1] status, double tol, bint bland):
    cdef Py_ssize_t j, n = d.shape[0], best = -1
    cdef int best_dir = 0, direction
    cdef double best_score = -1.0, dj
    cdef signed char s
    for j in range(n):
        s = status[j]
        dj = d[j]
        direction = 0
        if dj > tol and (s == AT_LOWER or s == FREE):
            direction = 1
        elif dj < -tol and (s == AT_UPPER or s == FREE):
            direction = -1
        if direction == 0:
            continue
        if bland:
            return j, direction
        if fabs(dj) > best_score:
            best_score = fabs(dj)
            best = j
            best_dir = direction
    return best, best_dir


def primal_ratio(const double[::1] beta, const double[::1] alpha, const double[::1] lo_b,
                 const double[::1] hi_b, const long[::1] basis, int direction,
                 double pivot_tol, bint bland):
    cdef Py_ssize_t i, m = beta.shape[0], r = -1
    cdef double a, slack, t, tmin = INFINITY, tmax = INFINITY, best_abs = -1.0, best_t = INFINITY
    cdef long best_basis = 0
    # pass 1: exact minimum (Bland) or relaxed minimum (Harris)
    for i in range(m):
        a = direction * alpha[i]
        if a > pivot_tol and isfinite(lo_b[i]):
            slack = beta[i] - lo_b[i]
        elif a < -pivot_tol and isfinite(hi_b[i]):
            slack = hi_b[i] - beta[i]
            a = -a
        else:
            continue
        if slack < 0.0:
            slack = 0.0
        if bland:
            t = slack / a
            if t < tmin or (t == tmin and basis[i] < best_basis):
                tmin = t
                r = i
                best_basis = basis[i]
        else:
            t = (slack + HARRIS_TOL) / a
            if t < tmax:
                tmax = t
    if bland:
        if r < 0:
            return -1, INFINITY
        return r, tmin
    if tmax == INFINITY:
        return -1, INFINITY
    for i in range(m):
        a = direction * alpha[i]
        if a > pivot_tol and isfinite(lo_b[i]):
            slack = beta[i] - lo_b[i]
        elif a < -pivot_tol and isfinite(hi_b[i]):
            slack = hi_b[i] - beta[i]
            a = -a
        else:
            continue
        if slack < 0.0:
            slack = 0.0
        t = slack / a
        if t <= tmax and a > best_abs:
            best_abs = a
            r = i
            best_t = t
    return r, best_t


def dual_ratio(const double[::1] alpha_row, const double[::1] d, const signed char[::1] status,
               bint increase, double pivot_tol, bint bland):
    cdef Py_ssize_t j, n = d.shape[0], best = -1
    cdef double a, absa, t, tmax = INFINITY, best_abs = -1.0, tmin = INFINITY
    cdef signed char s
    cdef bint cand
    for j in range(n):
        s = status[j]
        a = alpha_row[j]
        if s == FREE:
            cand = fabs(a) > pivot_tol
        elif s == AT_LOWER:
            cand = (a < -pivot_tol) if increase else (a > pivot_tol)
        elif s == AT_UPPER:
            cand = (a > pivot_tol) if increase else (a < -pivot_tol)
        else:
            cand = False
        if not cand:
            continue
        absa = fabs(a)
        if bland:
            t = fabs(d[j]) / absa
            if t < tmin:
                tmin = t
                best = j
        else:
            t = (fabs(d[j]) + HARRIS_TOL) / absa
            if t < tmax:
                tmax = t
    if bland or tmax == INFINITY:
        return best
    for j in range(n):
        s = status[j]
        a = alpha_row[j]
        if s == FREE:
            cand = fabs(a) > pivot_tol
        elif s == AT_LOWER:
            cand = (a < -pivot_tol) if increase else (a > pivot_tol)
        elif s == AT_UPPER:
            cand = (a > pivot_tol) if increase else (a < -pivot_tol)
        else:
            cand = False
        if not cand:
            continue
        absa = fabs(a)
        t = fabs(d[j]) / absa
        if t <= tmax and absa > best_abs:
            best_abs = absa
            best = j
    return best


def eta_ftran(double[::1] x, const long[::1] rows, const double[:, ::1] etas, Py_ssize_t count):
    cdef Py_ssize_t i, k, r, m = x.shape[0]
    cdef double xr
    for i in range(count):
        r = rows[i]
        xr = x[r] / etas[i, r]
        if xr != 0.0:
            for k in range(m):
                x[k] -= xr * etas[i, k]
        x[r] = xr


def eta_btran(double[::1] v, const long[::1] rows, const double[:, ::1] etas, Py_ssize_t count):
    cdef Py_ssize_t i, k, r, m = v.shape[0]
    cdef double acc
    for i in range(count - 1, -1, -1):
        r = rows[i]
        acc = 0.0
        for k in range(m):
            if k != r:
                acc += v[k] * etas[i, k]
        v[r] = (v[r] - acc) / etas[i, r]
