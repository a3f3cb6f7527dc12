"""Bounded-variable revised simplex over a sparse LU basis factorization.

Constraints are turned into equalities with one slack per row (slack bounds
encode the row sense) plus one artificial per row, used only in phase 1.
Nonbasic variables sit at a bound, so box constraints never become rows.
The primal method handles cold starts; the dual method re-optimizes after
bound changes, which is all branch-and-bound ever does to a node.

The basis is factored with SuperLU and updated in product form: each pivot
appends one eta column, and the factorization is rebuilt every
``REFACTOR_EVERY`` pivots. Problems are maximized. Rows and columns are
scaled by powers of two before solving, so scaling introduces no rounding.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..errors import NumericalFailure
from . import kernels as _kernel_select
from .model import Sense

log = logging.getLogger(__name__)

BASIC = _kernel_select.BASIC
AT_LOWER = _kernel_select.AT_LOWER
AT_UPPER = _kernel_select.AT_UPPER
FREE = _kernel_select.FREE
FIXED = _kernel_select.FIXED

PRIMAL_TOL = 1e-9
DUAL_TOL = 1e-9
PIVOT_TOL = 1e-9
DEGENERATE_STEP = 1e-12
BLAND_AFTER = 10
PERTURB = 1e-7  # relative cost shift that breaks dual ties during warm resolves
REFACTOR_EVERY = 100


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    objective: float = math.nan
    iterations: int = 0


def _pow2(v: np.ndarray) -> np.ndarray:
    return np.exp2(np.round(np.log2(v)))


def _scale_factors(A: sp.csr_matrix, passes: int = 4) -> tuple[np.ndarray, np.ndarray]:
    m, n = A.shape
    row = np.ones(m)
    col = np.ones(n)
    if A.nnz == 0:
        return row, col
    coo = A.tocoo()
    absval = np.abs(coo.data)
    for _ in range(passes):
        scaled = absval * row[coo.row] * col[coo.col]
        rmax = np.zeros(m)
        rmin = np.full(m, np.inf)
        np.maximum.at(rmax, coo.row, scaled)
        np.minimum.at(rmin, coo.row, scaled)
        ok = rmax > 0
        row[ok] /= np.sqrt(rmax[ok] * rmin[ok])
        scaled = absval * row[coo.row] * col[coo.col]
        cmax = np.zeros(n)
        cmin = np.full(n, np.inf)
        np.maximum.at(cmax, coo.col, scaled)
        np.minimum.at(cmin, coo.col, scaled)
        ok = cmax > 0
        col[ok] /= np.sqrt(cmax[ok] * cmin[ok])
    return _pow2(row), _pow2(col)


class _Factor:
    """B^-1 as an LU factorization followed by an eta file."""

    def __init__(self, m: int, kernels):
        self.m = m
        self.K = kernels
        self.rows = np.zeros(REFACTOR_EVERY + m + 1, dtype=np.int64)
        self.etas = np.zeros((REFACTOR_EVERY + m + 1, m))
        self.count = 0
        self.lu = None

    def factor(self, B: sp.csc_matrix) -> None:
        self.count = 0
        if self.m == 0:
            return
        try:
            self.lu = splu(sp.csc_matrix(B), permc_spec="COLAMD")
        except RuntimeError as exc:
            raise NumericalFailure(f"basis factorization failed: {exc}") from exc

    def ftran(self, a: np.ndarray) -> np.ndarray:
        if self.m == 0:
            return np.zeros(0)
        x = self.lu.solve(a)
        if self.count:
            self.K.eta_ftran(x, self.rows, self.etas, self.count)
        return x

    def btran(self, v: np.ndarray) -> np.ndarray:
        if self.m == 0:
            return np.zeros(0)
        v = np.array(v, dtype=float)
        if self.count:
            self.K.eta_btran(v, self.rows, self.etas, self.count)
        return self.lu.solve(v, trans="T")

    def update(self, alpha: np.ndarray, r: int) -> None:
        self.rows[self.count] = r
        self.etas[self.count] = alpha
        self.count += 1

    def unit_row(self, r: int) -> np.ndarray:
        e = np.zeros(self.m)
        e[r] = 1.0
        return self.btran(e)


class BoundedSimplex:
    """LP engine over ``max c.x  s.t.  A x (<=,>=,=) b,  lo <= x <= hi``.

    The instance keeps its basis between calls; :meth:`resolve` warm-starts
    from whatever basis the previous call ended on.
    """

    def __init__(self, A, senses, rhs, lower, upper, objective, *, kernels=None, scale=True):
        A = sp.csr_matrix(A, dtype=float)
        self.m, self.n = A.shape
        m, n = self.m, self.n
        self.K = kernels or _kernel_select.active
        if scale:
            self.row_scale, self.col_scale = _scale_factors(A)
        else:
            self.row_scale, self.col_scale = np.ones(m), np.ones(n)
        As = sp.diags(self.row_scale) @ A @ sp.diags(self.col_scale)
        eye = sp.identity(m, format="csc")
        self.A = sp.hstack([As.tocsc(), eye, eye], format="csc")
        self.A.sort_indices()
        self.AT = self.A.T.tocsr()
        self._indptr, self._indices, self._data = self.A.indptr, self.A.indices, self.A.data
        self.N = n + 2 * m
        self.b = np.asarray(rhs, dtype=float) * self.row_scale

        slack_lo = np.zeros(m)
        slack_hi = np.zeros(m)
        for i, s in enumerate(senses):
            s = Sense(s)
            if s is Sense.LE:
                slack_hi[i] = np.inf
            elif s is Sense.GE:
                slack_lo[i] = -np.inf
        self.lo = np.concatenate([np.zeros(n), slack_lo, np.zeros(m)])
        self.hi = np.concatenate([np.zeros(n), slack_hi, np.zeros(m)])
        self._set_structural_bounds(np.asarray(lower, float), np.asarray(upper, float))
        self.c = np.concatenate([np.asarray(objective, float) * self.col_scale, np.zeros(2 * m)])
        self.cost = self.c
        # fixed seed: the same model always pivots the same way
        jitter = np.random.default_rng(12345).uniform(0.5, 1.0, n)
        self._shift = np.zeros(self.N)
        self._shift[:n] = PERTURB * jitter * (1.0 + np.abs(self.c[:n]))

        self.basis = np.arange(n, n + m, dtype=np.int64)
        self.status = np.full(self.N, AT_LOWER, dtype=np.int8)
        self.x = np.zeros(self.N)
        self.factor = _Factor(m, self.K)
        self.dse = np.ones(m)  # dual steepest-edge weights, exact for a slack basis
        self.beta = np.zeros(m)
        self.d = np.zeros(self.N)
        self.iterations = 0
        self._since_refactor = 0
        self._warm = False
        self._iter_in_call = 0
        self._cap = 50 * (n + m) + 100

    # bounds and placement

    def _set_structural_bounds(self, lower, upper):
        self.lo[: self.n] = lower / self.col_scale
        self.hi[: self.n] = upper / self.col_scale

    def _place_at_bound(self, idx):
        lo, hi = self.lo[idx], self.hi[idx]
        fixed = lo == hi
        lo_ok = np.isfinite(lo)
        hi_ok = np.isfinite(hi)
        self.status[idx] = np.where(fixed, FIXED, np.where(lo_ok, AT_LOWER, np.where(hi_ok, AT_UPPER, FREE)))
        self.x[idx] = np.where(lo_ok, lo, np.where(hi_ok, hi, 0.0))

    def _column(self, j):
        lo, hi = self._indptr[j], self._indptr[j + 1]
        a = np.zeros(self.m)
        a[self._indices[lo:hi]] = self._data[lo:hi]
        return self.factor.ftran(a)

    def _compute_beta(self):
        xn = self.x.copy()
        xn[self.basis] = 0.0
        self.beta = self.factor.ftran(self.b - self.A @ xn)

    def _compute_duals(self):
        y = self.factor.btran(self.cost[self.basis])
        self.d = self.cost - self.AT @ y
        self.d[self.basis] = 0.0

    def _refactor(self):
        self.factor.factor(self.A[:, self.basis])
        self._compute_beta()
        self._compute_duals()
        self._since_refactor = 0

    def _tick(self):
        self.iterations += 1
        self._iter_in_call += 1
        if self._iter_in_call > self._cap:
            raise NumericalFailure(f"simplex exceeded {self._cap} iterations")

    def _pivot(self, r, j, alpha, alpha_row):
        leaving = self.basis[r]
        dj = self.d[j]
        p = alpha[r]
        self.d -= (dj / p) * alpha_row
        self.d[j] = 0.0
        self.d[leaving] = -dj / p
        self.factor.update(alpha, r)
        self.basis[r] = j
        self.status[j] = BASIC
        self._since_refactor += 1

    def _pivot_ok(self, alpha_r, row_j):
        """Guard against a pivot whose column and row views disagree.

        Drift in the eta file shows up here first; a fresh factorization
        usually cures it, otherwise the caller restarts cold.
        """
        if abs(alpha_r) > PIVOT_TOL and abs(alpha_r - row_j) <= 1e-6 * (1.0 + abs(alpha_r)):
            return True
        if self._since_refactor == 0:
            raise NumericalFailure(f"unstable pivot {alpha_r:.3g} vs {row_j:.3g}")
        self._refactor()
        return False

    def _maybe_refactor(self):
        if self._since_refactor >= REFACTOR_EVERY:
            self._refactor()

    def _leave_to(self, leaving, at_upper):
        if self.lo[leaving] == self.hi[leaving]:
            self.status[leaving] = FIXED
            self.x[leaving] = self.lo[leaving]
        elif at_upper:
            self.status[leaving] = AT_UPPER
            self.x[leaving] = self.hi[leaving]
        else:
            self.status[leaving] = AT_LOWER
            self.x[leaving] = self.lo[leaving]

    # primal simplex

    def _primal(self):
        K = self.K
        degenerate = 0
        bland = False
        while True:
            self._tick()
            j, direction = K.price(self.d, self.status, DUAL_TOL, bland)
            if j < 0:
                return "optimal"
            alpha = self._column(j)
            lo_b = self.lo[self.basis]
            hi_b = self.hi[self.basis]
            r, theta = K.primal_ratio(self.beta, alpha, lo_b, hi_b, self.basis, direction,
                                      PIVOT_TOL, bland)
            span = self.hi[j] - self.lo[j]
            if np.isfinite(span) and span <= theta:
                # bound flip, basis unchanged
                self.beta -= (direction * span) * alpha
                if direction > 0:
                    self.status[j], self.x[j] = AT_UPPER, self.hi[j]
                else:
                    self.status[j], self.x[j] = AT_LOWER, self.lo[j]
                degenerate, bland = 0, False
                continue
            if r < 0:
                return "unbounded"
            step = direction * theta
            leaving = self.basis[r]
            leaves_up = direction * alpha[r] < 0
            entering_value = self.x[j] + step
            alpha_row = self.AT @ self.factor.unit_row(r)
            if not self._pivot_ok(alpha[r], alpha_row[j]):
                continue
            self.beta -= step * alpha
            self._leave_to(leaving, leaves_up)
            self._pivot(r, j, alpha, alpha_row)
            self.beta[r] = entering_value
            self._maybe_refactor()
            if theta <= DEGENERATE_STEP:
                degenerate += 1
                bland = degenerate >= BLAND_AFTER
            else:
                degenerate, bland = 0, False

    # dual simplex

    def _dual(self):
        K = self.K
        degenerate = 0
        bland = False
        while True:
            self._tick()
            lo_b = self.lo[self.basis]
            hi_b = self.hi[self.basis]
            below = lo_b - self.beta
            above = self.beta - hi_b
            tol_b = PRIMAL_TOL * (1.0 + np.abs(self.beta))
            viol = np.maximum(below, above)
            bad = viol > tol_b
            if not bad.any():
                return "optimal"
            if bland:
                cand = np.flatnonzero(bad)
                r = int(cand[np.argmin(self.basis[cand])])
            else:
                r = int(np.argmax(np.where(bad, viol * viol / self.dse, -np.inf)))
            increase = below[r] > above[r]
            rho = self.factor.unit_row(r)
            alpha_row = self.AT @ rho
            j = K.dual_ratio(alpha_row, self.d, self.status, increase, PIVOT_TOL, bland)
            if j < 0:
                return "infeasible"
            alpha = self._column(j)
            if not self._pivot_ok(alpha[r], alpha_row[j]):
                continue
            self._update_dse(r, alpha, rho)
            target = lo_b[r] if increase else hi_b[r]
            delta = (self.beta[r] - target) / alpha[r]
            step_dual = abs(self.d[j] / alpha_row[j])
            entering_value = self.x[j] + delta
            leaving = self.basis[r]
            self.beta -= delta * alpha
            self._leave_to(leaving, not increase)
            self._pivot(r, j, alpha, alpha_row)
            self.beta[r] = entering_value
            self._maybe_refactor()
            if step_dual <= DEGENERATE_STEP:
                degenerate += 1
                bland = degenerate >= BLAND_AFTER
            else:
                degenerate, bland = 0, False

    def _update_dse(self, r, alpha, rho):
        tau = self.factor.ftran(rho)
        w_r = float(rho @ rho)
        ratio = alpha / alpha[r]
        w = self.dse - 2.0 * ratio * tau + ratio * ratio * w_r
        np.maximum(w, 1e-6, out=w)
        w[r] = max(w_r / (alpha[r] * alpha[r]), 1e-6)
        self.dse = w

    # drivers

    def _primal_infeasibility(self):
        lo_b = self.lo[self.basis]
        hi_b = self.hi[self.basis]
        viol = np.maximum(lo_b - self.beta, self.beta - hi_b)
        return float(np.max(viol / (1.0 + np.abs(self.beta)), initial=0.0))

    def solve(self) -> LPResult:
        """Cold start from the slack basis.

        When every variable is bounded in its improving direction the slack
        basis is dual feasible and the dual simplex runs directly; otherwise
        a two-phase primal simplex with artificials does.
        """
        self._iter_in_call = 0
        c = self.c[: self.n]
        lo, hi = self.lo[: self.n], self.hi[: self.n]
        if not (np.any((c > 0) & ~np.isfinite(hi)) or np.any((c < 0) & ~np.isfinite(lo))):
            try:
                return self._dual_cold()
            except NumericalFailure:
                log.debug("dual cold start failed, using the primal method")
                self._iter_in_call = 0
        return self._primal_cold()

    def _dual_cold(self) -> LPResult:
        m, n = self.m, self.n
        art = np.arange(n + m, n + 2 * m)
        slack = np.arange(n, n + m)
        self.lo[art] = 0.0
        self.hi[art] = 0.0
        self.status[art] = FIXED
        self.x[n:] = 0.0
        idx = np.arange(n)
        lo, hi, c = self.lo[idx], self.hi[idx], self.c[idx]
        st = np.where(lo == hi, FIXED,
                      np.where(c > 0, AT_UPPER,
                               np.where(c < 0, AT_LOWER,
                                        np.where(np.isfinite(lo), AT_LOWER,
                                                 np.where(np.isfinite(hi), AT_UPPER, FREE)))))
        self.status[idx] = st
        self.x[idx] = np.where(st == AT_UPPER, hi, np.where(st == FREE, 0.0, lo))
        self.basis = slack.astype(np.int64)
        self.status[slack] = BASIC
        self.factor.factor(self.A[:, self.basis])
        self.dse = np.ones(m)
        self._since_refactor = 0
        self._compute_beta()
        shift = np.where(st == AT_LOWER, -self._shift[:n], np.where(st == AT_UPPER, self._shift[:n], 0.0))
        self.cost = self.c + np.concatenate([shift, np.zeros(2 * m)])
        try:
            self._compute_duals()
            state = self._dual()
        finally:
            self.cost = self.c
        if state == "infeasible":
            self._warm = False
            return LPResult("infeasible", iterations=self._iter_in_call)
        self._compute_duals()
        if self._primal() == "unbounded":
            self._warm = False
            return LPResult("unbounded", iterations=self._iter_in_call)
        self._warm = True
        return self._finish()

    def _primal_cold(self) -> LPResult:
        m, n = self.m, self.n
        art = np.arange(n + m, n + 2 * m)
        slack = np.arange(n, n + m)
        self._place_at_bound(np.arange(n))
        self.x[slack] = 0.0
        xn = self.x.copy()
        xn[n:] = 0.0
        resid = self.b - self.A @ xn
        slack_ok = (resid >= self.lo[slack] - PRIMAL_TOL) & (resid <= self.hi[slack] + PRIMAL_TOL)
        self.basis = np.where(slack_ok, slack, art).astype(np.int64)
        self.status[n:] = FIXED
        self.x[n:] = 0.0
        self.status[self.basis] = BASIC
        # nonbasic slacks sit at zero, their only finite bound in every row sense
        for i in np.flatnonzero(~slack_ok):
            s = n + i
            self.status[s] = FIXED if self.lo[s] == self.hi[s] else (
                AT_LOWER if np.isfinite(self.lo[s]) else AT_UPPER)
        self.lo[art] = 0.0
        self.hi[art] = 0.0
        need = np.flatnonzero(~slack_ok)
        self.lo[art[need]] = np.where(resid[need] > 0, 0.0, -np.inf)
        self.hi[art[need]] = np.where(resid[need] > 0, np.inf, 0.0)
        self.factor.factor(self.A[:, self.basis])
        self.dse = np.ones(m)
        self.beta = resid.copy()
        self._since_refactor = 0

        if need.size:
            phase1 = np.zeros(self.N)
            phase1[art[need]] = np.where(resid[need] > 0, -1.0, 1.0)
            self.cost = phase1
            self._compute_duals()
            self._primal()
            self._refactor()
            infeas = -float(self.cost[self.basis] @ self.beta)
            scale = 1.0 + float(np.abs(self.b).max(initial=0.0))
            if infeas > 1e-7 * scale:
                self.cost = self.c
                self._warm = False
                return LPResult("infeasible", iterations=self._iter_in_call)
            self._drive_out_artificials()
        self.lo[art] = 0.0
        self.hi[art] = 0.0
        nb_art = art[self.status[art] != BASIC]
        self.status[nb_art] = FIXED
        self.x[nb_art] = 0.0
        self.cost = self.c
        self._refactor()
        state = self._primal()
        if state == "unbounded":
            self._warm = False
            return LPResult("unbounded", iterations=self._iter_in_call)
        self._warm = True
        return self._finish()

    def _drive_out_artificials(self):
        n, m = self.n, self.m
        art_lo = n + m
        for r in range(m):
            leaving = self.basis[r]
            if leaving < art_lo:
                continue
            alpha_row = self.AT @ self.factor.unit_row(r)
            alpha_row[art_lo:] = 0.0
            alpha_row[self.status == BASIC] = 0.0
            j = int(np.argmax(np.abs(alpha_row)))
            if abs(alpha_row[j]) <= 1e-7:
                continue  # redundant row: artificial stays basic, pinned at zero
            alpha = self._column(j)
            delta = self.beta[r] / alpha[r]
            entering_value = self.x[j] + delta
            self.beta -= delta * alpha
            self.status[leaving] = FIXED
            self.x[leaving] = 0.0
            self._pivot(r, j, alpha, alpha_row)
            self.beta[r] = entering_value
            self._maybe_refactor()

    def snapshot(self):
        """Opaque copy of the current basis, for :meth:`restore`."""
        return (self.basis.copy(), self.status.copy(), self._warm)

    def restore(self, snap) -> None:
        """Return to a basis saved by :meth:`snapshot`; the next resolve starts there."""
        basis, status, warm = snap
        self.basis = basis.copy()
        self.status = status.copy()
        self.dse = np.ones(self.m)
        self._warm = warm
        if warm:
            try:
                self._refactor()
            except NumericalFailure:
                self._warm = False

    def resolve(self, lower=None, upper=None) -> LPResult:
        """Re-optimize after changing structural bounds, warm from the current basis."""
        if lower is not None:
            self._set_structural_bounds(np.asarray(lower, float), np.asarray(upper, float))
        if not self._warm:
            return self.solve()
        self._iter_in_call = 0
        n = self.n
        idx = np.flatnonzero(self.status[:n] != BASIC)
        lo, hi, d = self.lo[idx], self.hi[idx], self.d[idx]
        lo_ok, hi_ok = np.isfinite(lo), np.isfinite(hi)
        want_up = d > DUAL_TOL
        want_down = d < -DUAL_TOL
        if np.any(want_up & ~hi_ok & (lo != hi)) or np.any(want_down & ~lo_ok & (lo != hi)):
            return self.solve()
        st = np.where(lo == hi, FIXED,
                      np.where(want_up, AT_UPPER,
                               np.where(want_down, AT_LOWER,
                                        np.where(lo_ok, AT_LOWER, np.where(hi_ok, AT_UPPER, FREE)))))
        self.status[idx] = st
        self.x[idx] = np.where(st == AT_UPPER, hi, np.where(st == FREE, 0.0, lo))
        self._compute_beta()
        try:
            # shift nonbasic costs away from their bounds' dual ties
            shift = np.where(self.status == AT_LOWER, -self._shift,
                             np.where(self.status == AT_UPPER, self._shift, 0.0))
            self.cost = self.c + shift
            self._compute_duals()
            state = self._dual()
            self.cost = self.c
            if state == "infeasible":
                return LPResult("infeasible", iterations=self._iter_in_call)
            self._compute_duals()
            state = self._primal()
        except NumericalFailure:
            self.cost = self.c
            log.debug("warm start failed, falling back to a cold solve")
            return self.solve()
        if state == "unbounded":
            self._warm = False
            return LPResult("unbounded", iterations=self._iter_in_call)
        try:
            return self._finish()
        except NumericalFailure:
            log.debug("warm finish failed, falling back to a cold solve")
            return self.solve()

    def _finish(self) -> LPResult:
        for _ in range(3):
            self._refactor()
            if self._primal_infeasibility() > PRIMAL_TOL:
                if self._dual() == "infeasible":
                    return LPResult("infeasible", iterations=self._iter_in_call)
            if self._primal() == "optimal" and self._primal_infeasibility() <= PRIMAL_TOL:
                break
        full = self.x.copy()
        full[self.basis] = self.beta
        x = full[: self.n] * self.col_scale
        lo = self.lo[: self.n] * self.col_scale
        hi = self.hi[: self.n] * self.col_scale
        x = np.minimum(np.maximum(x, lo), hi)
        obj = float(self.c[: self.n] @ full[: self.n])
        return LPResult("optimal", x, obj, self._iter_in_call)
