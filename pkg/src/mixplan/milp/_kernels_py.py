"""Pure numpy versions of the simplex inner-loop kernels.

Semantics match ``_kernels.pyx`` exactly; the compiled module is preferred
when it imports.

Nonbasic status codes: 0 basic, 1 at lower, 2 at upper, 3 free at zero,
4 fixed (lower == upper, never enters).
"""

from __future__ import annotations

import numpy as np

BASIC, AT_LOWER, AT_UPPER, FREE, FIXED = 0, 1, 2, 3, 4
HARRIS_TOL = 1e-9


def price(d, status, tol, bland):
    """Entering column and direction (+1 raise, -1 lower); (-1, 0) when optimal."""
    up = ((status == AT_LOWER) | (status == FREE)) & (d > tol)
    down = ((status == AT_UPPER) | (status == FREE)) & (d < -tol)
    eligible = up | down
    if not eligible.any():
        return -1, 0
    if bland:
        j = int(np.flatnonzero(eligible)[0])
    else:
        score = np.where(eligible, np.abs(d), -1.0)
        j = int(np.argmax(score))
    return j, (1 if up[j] else -1)


def primal_ratio(beta, alpha, lo_b, hi_b, basis, direction, pivot_tol, bland):
    """Leaving row and step length for a primal step; (-1, inf) when unbounded."""
    a = direction * alpha
    dec = (a > pivot_tol) & np.isfinite(lo_b)
    inc = (a < -pivot_tol) & np.isfinite(hi_b)
    if not (dec.any() or inc.any()):
        return -1, np.inf
    with np.errstate(invalid="ignore", divide="ignore"):
        slack = np.where(dec, beta - lo_b, np.where(inc, hi_b - beta, np.inf))
        absa = np.abs(a)
        cand = dec | inc
        t = np.where(cand, np.maximum(slack, 0.0) / absa, np.inf)
        if bland:
            tmin = t.min()
            ties = np.flatnonzero(t <= tmin)
            r = int(ties[np.argmin(basis[ties])])
            return r, float(t[r])
        relaxed = np.where(cand, (np.maximum(slack, 0.0) + HARRIS_TOL) / absa, np.inf)
        tmax = relaxed.min()
        ok = cand & (t <= tmax)
        score = np.where(ok, absa, -1.0)
        r = int(np.argmax(score))
        return r, float(t[r])


def dual_ratio(alpha_row, d, status, increase, pivot_tol, bland):
    """Entering column for a dual step on a row whose basic must rise/fall."""
    lower = status == AT_LOWER
    upper = status == AT_UPPER
    free = status == FREE
    if increase:
        cand = (lower & (alpha_row < -pivot_tol)) | (upper & (alpha_row > pivot_tol))
    else:
        cand = (lower & (alpha_row > pivot_tol)) | (upper & (alpha_row < -pivot_tol))
    cand = cand | (free & (np.abs(alpha_row) > pivot_tol))
    if not cand.any():
        return -1
    absa = np.abs(alpha_row)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(cand, np.abs(d) / absa, np.inf)
        if bland:
            return int(np.argmin(t))
        relaxed = np.where(cand, (np.abs(d) + HARRIS_TOL) / absa, np.inf)
        tmax = relaxed.min()
    ok = cand & (t <= tmax)
    score = np.where(ok, absa, -1.0)
    return int(np.argmax(score))


def eta_ftran(x, rows, etas, count):
    """Apply the eta file to ``x`` in place: x <- E_k^-1 ... E_1^-1 x."""
    for i in range(count):
        r = rows[i]
        a = etas[i]
        xr = x[r] / a[r]
        if xr != 0.0:
            x -= xr * a
        x[r] = xr


def eta_btran(v, rows, etas, count):
    """Apply the eta file to a row vector in place: v <- v E_k^-1 ... E_1^-1."""
    for i in range(count - 1, -1, -1):
        r = rows[i]
        a = etas[i]
        v[r] = (v[r] - (v @ a - v[r] * a[r])) / a[r]
