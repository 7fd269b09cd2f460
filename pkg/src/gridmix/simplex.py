"""Two-phase bounded-variable revised simplex.

Every row ``i`` gets a logical variable ``s_i = a_i . x`` bounded by the row
bounds, so the working system is ``[A  -I] z = 0`` with all structure carried
in variable bounds.  Phase 1 minimizes the sum of basic bound violations
(composite objective); phase 2 the scaled cost.  The basis inverse is a
product-form eta file on top of an LU factorization (dense LAPACK for small
bases, SuperLU otherwise) rebuilt every ``refactor_interval`` pivots.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from gridmix.builder import LpProblem
from gridmix.presolve import PresolveInfeasible, ReducedProblem, presolve

LOGGER = logging.getLogger(__name__)

DENSE_BASIS_LIMIT = 400
STALL_WINDOW = 1000

# nonbasic status codes
_BASIC, _AT_LB, _AT_UB, _FREE, _FIXED = 0, 1, 2, 3, 4


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"

    def __str__(self) -> str:
        return self.value


class SingularBasisError(RuntimeError):
    """Basis stayed numerically singular after refactorization retries."""


@dataclass(frozen=True)
class SolverOptions:
    feasibility_tol: float = 1e-7
    optimality_tol: float = 1e-7
    pivot_tol: float = 1e-9
    max_iterations: int | None = None  # None -> 200 * (rows + cols)
    refactor_interval: int = 50
    anti_cycling: bool = True
    presolve: bool = True
    scaling: bool = True
    time_limit: float | None = None

    def __post_init__(self) -> None:
        for name in ("feasibility_tol", "optimality_tol", "pivot_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.refactor_interval < 1:
            raise ValueError("refactor_interval must be >= 1")


@dataclass(frozen=True, eq=False)
class Solution:
    """Solver output in the original (pre-presolve) index space.

    ``duals`` follow the convention ``reduced_costs = c - A.T @ duals``; under
    minimization a binding ``>=`` row has a non-negative dual.
    """

    status: Status
    x: np.ndarray
    duals: np.ndarray
    reduced_costs: np.ndarray
    objective: float
    iterations: int
    max_primal_residual: float
    max_dual_residual: float
    basic_columns: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    phase1_iterations: int = 0
    solve_seconds: float = 0.0
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


# ------------------------------------------------------------ factorization


class _BasisFactor:
    """LU of the basis plus a product-form eta file."""

    def __init__(self, K: sp.csc_matrix, m: int):
        self.K = K
        self.m = m
        self.dense = m <= DENSE_BASIS_LIMIT
        self._lu = None
        self.etas: list[tuple[int, np.ndarray, np.ndarray, float]] = []

    def factor(self, basis: np.ndarray) -> None:
        B = self.K[:, basis]
        self.etas = []
        if self.dense:
            Bd = B.toarray()
            lu, piv = sla.lu_factor(Bd, check_finite=False)
            diag = np.abs(np.diag(lu))
            if diag.size and diag.min() <= 1e-11 * max(1.0, diag.max()):
                raise SingularBasisError("basis matrix is numerically singular")
            self._lu = (lu, piv)
        else:
            try:
                self._lu = spla.splu(B.tocsc(), permc_spec="COLAMD")
            except RuntimeError as exc:
                raise SingularBasisError(str(exc)) from exc
            diag = np.abs(self._lu.U.diagonal())
            if diag.size and diag.min() <= 1e-11 * max(1.0, diag.max()):
                raise SingularBasisError("basis matrix is numerically singular")

    def ftran(self, v: np.ndarray) -> np.ndarray:
        if self.dense:
            out = sla.lu_solve(self._lu, v, check_finite=False)
        else:
            out = self._lu.solve(v)
        for r, nz, vals, piv in self.etas:
            vr = out[r] / piv
            if vr != 0.0:
                out[nz] -= vals * vr
            out[r] = vr
        return out

    def btran(self, w: np.ndarray) -> np.ndarray:
        w = np.array(w, dtype=float)
        for r, nz, vals, piv in reversed(self.etas):
            w[r] = (w[r] - w[nz] @ vals) / piv
        if self.dense:
            return sla.lu_solve(self._lu, w, trans=1, check_finite=False)
        return self._lu.solve(w, trans="T")

    def update(self, r: int, alpha: np.ndarray) -> None:
        nz = np.flatnonzero(np.abs(alpha) > 1e-14)
        nz = nz[nz != r]
        self.etas.append((r, nz, alpha[nz].copy(), float(alpha[r])))


# ------------------------------------------------------------------ scaling


def _pow2(v: np.ndarray) -> np.ndarray:
    return np.exp2(np.round(np.log2(v)))


def _scale_factors(A: sp.csc_matrix, passes: int = 6) -> tuple[np.ndarray, np.ndarray]:
    """Geometric-mean row/column scaling rounded to powers of two."""
    m, n = A.shape
    R, S = np.ones(m), np.ones(n)
    if A.nnz == 0:
        return R, S
    coo = A.tocoo()
    rows, cols, logs = coo.row, coo.col, np.log2(np.abs(coo.data))
    rlog, clog = np.zeros(m), np.zeros(n)
    for _ in range(passes):
        vals = logs + rlog[rows] + clog[cols]
        rmax = np.full(m, -np.inf)
        rmin = np.full(m, np.inf)
        np.maximum.at(rmax, rows, vals)
        np.minimum.at(rmin, rows, vals)
        ok = np.isfinite(rmax)
        rlog[ok] -= 0.5 * (rmax[ok] + rmin[ok])
        vals = logs + rlog[rows] + clog[cols]
        cmax = np.full(n, -np.inf)
        cmin = np.full(n, np.inf)
        np.maximum.at(cmax, cols, vals)
        np.minimum.at(cmin, cols, vals)
        ok = np.isfinite(cmax)
        clog[ok] -= 0.5 * (cmax[ok] + cmin[ok])
    return np.exp2(np.round(rlog)), np.exp2(np.round(clog))


# ------------------------------------------------------------------- engine


class _Result(enum.Enum):
    OPTIMAL = 0
    INFEASIBLE = 1
    UNBOUNDED = 2
    LIMIT = 3


class _Simplex:
    """Bounded primal simplex on ``[A -I] z = 0``, ``lo <= z <= hi``."""

    def __init__(self, A: sp.csc_matrix, c: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                 opts: SolverOptions, max_iter: int):
        m, n = A.shape
        self.m, self.n = m, n
        self.A = A
        self.AT = A.T.tocsr()
        self.K = sp.hstack([A, -sp.identity(m, format="csc")], format="csc")
        self.cost = np.concatenate([c, np.zeros(m)])
        self.lo, self.hi = lo.astype(float), hi.astype(float)
        self.opts = opts
        self.max_iter = max_iter
        self.ftol = opts.feasibility_tol
        self.otol = opts.optimality_tol
        self.iterations = 0
        self.phase1_iterations = 0
        self.bland = False
        self.deadline = None if opts.time_limit is None else time.monotonic() + opts.time_limit

        N = n + m
        self.status = np.empty(N, dtype=np.int8)
        self.x = np.zeros(N)
        fixed = self.lo == self.hi
        has_lo, has_hi = np.isfinite(self.lo), np.isfinite(self.hi)
        self.status[:] = np.where(fixed, _FIXED, np.where(has_lo, _AT_LB, np.where(has_hi, _AT_UB, _FREE)))
        self.x = np.where(has_lo, self.lo, np.where(has_hi, self.hi, 0.0))
        self.basis = np.arange(n, n + m)
        self.status[self.basis] = _BASIC
        self.lu = _BasisFactor(self.K, m)
        self._good_basis = self.basis.copy()
        self._good_status = self.status.copy()
        self._refactor()

    # -- basic quantities
    def _recompute_basics(self) -> None:
        z = self.x.copy()
        z[self.basis] = 0.0
        rhs = -(self.K @ z)
        self.x[self.basis] = self.lu.ftran(rhs)

    def _refactor(self) -> None:
        for attempt in range(3):
            try:
                self.lu.factor(self.basis)
                break
            except SingularBasisError:
                LOGGER.warning("singular basis at iteration %d; reverting to last good basis", self.iterations)
                if attempt == 2 or np.array_equal(self.basis, self._good_basis):
                    raise
                self.basis = self._good_basis.copy()
                self.status = self._good_status.copy()
                nb = self.status != _BASIC
                self.x[nb] = self._nonbasic_values(nb)
                self.bland = True
        self._good_basis = self.basis.copy()
        self._good_status = self.status.copy()
        self._recompute_basics()

    def _nonbasic_values(self, mask: np.ndarray) -> np.ndarray:
        st = self.status[mask]
        return np.where((st == _AT_LB) | (st == _FIXED), self.lo[mask],
                        np.where(st == _AT_UB, self.hi[mask], 0.0))

    def _infeasibility(self) -> tuple[np.ndarray, float]:
        xb = self.x[self.basis]
        lo, hi = self.lo[self.basis], self.hi[self.basis]
        below = xb < lo - self.ftol
        above = xb > hi + self.ftol
        cb = np.where(below, -1.0, np.where(above, 1.0, 0.0))
        total = float(np.sum(np.where(below, lo - xb, 0.0)) + np.sum(np.where(above, xb - hi, 0.0)))
        return cb, total

    def _reduced_costs(self, cb: np.ndarray, phase: int) -> np.ndarray:
        y = self.lu.btran(cb)
        d = np.empty(self.n + self.m)
        if phase == 2:
            d[: self.n] = self.cost[: self.n] - self.AT @ y
        else:
            d[: self.n] = -(self.AT @ y)
        d[self.n:] = y
        d[self.basis] = 0.0
        return d

    def _choose_entering(self, d: np.ndarray, rejected: set[int]) -> int:
        st = self.status
        can_inc = (st == _AT_LB) | (st == _FREE)
        can_dec = (st == _AT_UB) | (st == _FREE)
        score = np.where(can_inc & (d < -self.otol), -d, 0.0)
        score = np.where(can_dec & (d > self.otol), d, score)
        if rejected:
            score[list(rejected)] = 0.0
        if self.bland:
            cand = np.flatnonzero(score > 0.0)
            return int(cand[0]) if cand.size else -1
        q = int(np.argmax(score))
        return q if score[q] > 0.0 else -1

    def _column(self, q: int) -> np.ndarray:
        v = np.zeros(self.m)
        lo, hi = self.K.indptr[q], self.K.indptr[q + 1]
        v[self.K.indices[lo:hi]] = self.K.data[lo:hi]
        return v

    def _ratio_test(self, q: int, direction: float, alpha: np.ndarray, phase: int):
        """Return (theta, leaving position or -1 for bound flip / None if unbounded)."""
        xb = self.x[self.basis]
        lo, hi = self.lo[self.basis], self.hi[self.basis]
        delta = -direction * alpha
        ptol = self.opts.pivot_tol
        dec = delta < -ptol
        inc = delta > ptol
        with np.errstate(divide="ignore", invalid="ignore"):
            if phase == 1:
                below = xb < lo - self.ftol
                above = xb > hi + self.ftol
                feas = ~(below | above)
            else:
                below = above = np.zeros(self.m, dtype=bool)
                feas = np.ones(self.m, dtype=bool)
            t_exact = np.full(self.m, np.inf)
            t_relax = np.full(self.m, np.inf)
            m1 = feas & dec & np.isfinite(lo)
            t_exact[m1] = (xb[m1] - lo[m1]) / -delta[m1]
            t_relax[m1] = (xb[m1] - lo[m1] + self.ftol) / -delta[m1]
            m2 = feas & inc & np.isfinite(hi)
            t_exact[m2] = (hi[m2] - xb[m2]) / delta[m2]
            t_relax[m2] = (hi[m2] - xb[m2] + self.ftol) / delta[m2]
            m3 = below & inc
            t_exact[m3] = t_relax[m3] = (lo[m3] - xb[m3]) / delta[m3]
            m4 = above & dec
            t_exact[m4] = t_relax[m4] = (xb[m4] - hi[m4]) / -delta[m4]

        span = self.hi[q] - self.lo[q]
        if self.bland:
            theta = t_exact.min() if self.m else np.inf
            if not np.isfinite(theta) and not np.isfinite(span):
                return np.inf, None
            if span <= theta:
                return span, -1
            ties = np.flatnonzero(t_exact <= theta + 1e-12 * max(1.0, abs(theta)))
            r = int(ties[np.argmin(self.basis[ties])])
            return max(theta, 0.0), r

        theta_max = t_relax.min() if self.m else np.inf
        if not np.isfinite(theta_max) and not np.isfinite(span):
            return np.inf, None
        if span <= theta_max:
            return span, -1
        cand = np.flatnonzero(t_exact <= theta_max)
        mag = np.abs(alpha[cand])
        best = mag.max()
        ties = cand[mag >= best * (1.0 - 1e-12)]
        r = int(ties[np.argmin(self.basis[ties])])
        return max(float(t_exact[r]), 0.0), r

    def _pivot(self, q: int, direction: float, theta: float, r: int, alpha: np.ndarray) -> None:
        delta = -direction * alpha
        xb_before = self.x[self.basis]
        self.x[q] += direction * theta
        self.x[self.basis] = xb_before + delta * theta
        if r < 0:
            self.status[q] = _AT_UB if direction > 0 else _AT_LB
            self.x[q] = self.hi[q] if direction > 0 else self.lo[q]
            return
        leave = int(self.basis[r])
        lo, hi = self.lo[leave], self.hi[leave]
        if lo == hi:
            code, value = _FIXED, lo
        elif delta[r] > 0:
            was_below = xb_before[r] < lo - self.ftol
            code, value = (_AT_LB, lo) if was_below else (_AT_UB, hi)
        else:
            was_above = xb_before[r] > hi + self.ftol
            code, value = (_AT_UB, hi) if was_above else (_AT_LB, lo)
        self.status[leave] = code
        self.x[leave] = value
        self.basis[r] = q
        self.status[q] = _BASIC
        self.lu.update(r, alpha)

    def run(self) -> _Result:
        stall = 0
        rejected: set[int] = set()
        last_phase = 0
        while True:
            if self.iterations >= self.max_iter:
                return _Result.LIMIT
            if self.deadline is not None and time.monotonic() > self.deadline:
                return _Result.LIMIT
            if len(self.lu.etas) >= self.opts.refactor_interval:
                self._refactor()
            cb, infeas = self._infeasibility()
            phase = 1 if infeas > 0.0 else 2
            if phase != last_phase:
                LOGGER.debug("iteration %d: phase %d (infeasibility %.3g)", self.iterations, phase, infeas)
                last_phase = phase
                rejected.clear()
            if phase == 2:
                cb = self.cost[self.basis]
            d = self._reduced_costs(cb, phase)
            q = self._choose_entering(d, rejected)
            if q < 0:
                if rejected or self.lu.etas:
                    # confirm on a fresh factorization before concluding
                    rejected.clear()
                    self._refactor()
                    cb2, infeas2 = self._infeasibility()
                    phase2 = 1 if infeas2 > 0.0 else 2
                    if phase2 == 2:
                        cb2 = self.cost[self.basis]
                    if self._choose_entering(self._reduced_costs(cb2, phase2), rejected) >= 0:
                        continue
                    phase = phase2
                    infeas = infeas2
                return _Result.INFEASIBLE if phase == 1 else _Result.OPTIMAL

            direction = 1.0 if d[q] < 0 else -1.0
            alpha = self.lu.ftran(self._column(q))
            theta, r = self._ratio_test(q, direction, alpha, phase)
            if r is None:
                if phase == 2:
                    return _Result.UNBOUNDED
                rejected.add(q)
                continue
            if r >= 0 and abs(alpha[r]) < self.opts.pivot_tol:
                if self.lu.etas:
                    self._refactor()
                else:
                    rejected.add(q)
                continue
            self._pivot(q, direction, theta, r, alpha)
            rejected.clear()
            self.iterations += 1
            if phase == 1:
                self.phase1_iterations += 1
            gain = abs(d[q]) * theta
            if self.opts.anti_cycling:
                if gain <= 1e-12:
                    stall += 1
                    if stall >= STALL_WINDOW and not self.bland:
                        LOGGER.debug("stall detected at iteration %d; switching to Bland's rule", self.iterations)
                        self.bland = True
                else:
                    stall = 0
                    if self.bland:
                        self.bland = False

    def duals(self) -> np.ndarray:
        return self.lu.btran(self.cost[self.basis])


# ------------------------------------------------------------------ driver


def _residuals(p: LpProblem, x: np.ndarray, y: np.ndarray, d: np.ndarray) -> tuple[float, float]:
    act = p.A @ x
    scale = np.maximum(1.0, np.abs(p.rhs))
    row_viol = np.maximum(p.row_lower - act, act - p.row_upper) / scale
    bound_viol = np.maximum(p.lb - x, x - p.ub)
    primal = float(max(np.max(row_viol, initial=0.0), np.max(bound_viol, initial=0.0), 0.0))
    # dual sign conditions: L rows y <= 0, G rows y >= 0; columns at lb d >= 0, at ub d <= 0
    dviol = np.where(p.senses == "G", np.maximum(-y, 0.0), np.where(p.senses == "L", np.maximum(y, 0.0), 0.0))
    tol = 1e-9 * np.maximum(1.0, np.abs(x))
    can_inc = x < p.ub - tol
    can_dec = x > p.lb + tol
    col_viol = np.maximum(np.where(can_inc, np.maximum(-d, 0.0), 0.0), np.where(can_dec, np.maximum(d, 0.0), 0.0))
    dual = float(max(np.max(dviol, initial=0.0), np.max(col_viol, initial=0.0)))
    return primal, dual


def _trivial(red: ReducedProblem) -> tuple[_Result, np.ndarray]:
    """Solve a problem with no rows left: each column sits at its cheaper bound."""
    x = np.where(red.c > 0, red.lb, np.where(red.c < 0, red.ub, np.where(np.isfinite(red.lb), red.lb,
                                                                           np.where(np.isfinite(red.ub), red.ub, 0.0))))
    if not np.all(np.isfinite(x)):
        return _Result.UNBOUNDED, np.where(np.isfinite(x), x, 0.0)
    return _Result.OPTIMAL, x


def _empty_solution(p: LpProblem, status: Status, message: str, t0: float) -> Solution:
    return Solution(status, np.zeros(p.num_cols), np.zeros(p.num_rows), p.c.copy(), math.nan, 0,
                    math.inf, math.inf, solve_seconds=time.monotonic() - t0, message=message)


def solve(p: LpProblem, options: SolverOptions | None = None) -> Solution:
    """Solve ``p`` to optimality (or prove infeasible/unbounded)."""
    o = options or SolverOptions()
    t0 = time.monotonic()
    try:
        if o.presolve:
            red, post = presolve(p)
        else:
            from gridmix.presolve import Postsolve, _row_bounds
            lo, hi = _row_bounds(p)
            if np.any(p.lb > p.ub):
                raise PresolveInfeasible("column bounds cross")
            red = ReducedProblem(p.c.astype(float), p.A.tocsc(), lo, hi, p.lb.astype(float),
                                 p.ub.astype(float), p.obj_offset)
            post = Postsolve(p, np.arange(p.num_rows), np.arange(p.num_cols))
    except PresolveInfeasible as exc:
        LOGGER.info("presolve: %s", exc)
        return _empty_solution(p, Status.INFEASIBLE, f"presolve: {exc}", t0)

    m, n = red.shape
    LOGGER.info("presolve: %dx%d -> %dx%d", p.num_rows, p.num_cols, m, n)
    max_iter = o.max_iterations if o.max_iterations is not None else 200 * (p.num_rows + p.num_cols)
    iterations = phase1 = 0
    basic_cols = np.zeros(0, np.int64)

    if m == 0:
        result, xr = _trivial(red)
        yr = np.zeros(0)
    else:
        if o.scaling:
            R, S = _scale_factors(red.A)
        else:
            R, S = np.ones(m), np.ones(n)
        As = sp.diags(R) @ red.A @ sp.diags(S)
        As = As.tocsc()
        cs = red.c * S
        cmax = np.max(np.abs(cs), initial=0.0)
        sigma = float(_pow2(np.array([1.0 / cmax]))[0]) if cmax > 0 and o.scaling else 1.0
        cs = cs * sigma
        lo = np.concatenate([red.lb / S, red.row_lo * R])
        hi = np.concatenate([red.ub / S, red.row_hi * R])
        engine = _Simplex(As, cs, lo, hi, o, max_iter)
        result = engine.run()
        iterations, phase1 = engine.iterations, engine.phase1_iterations
        xr = engine.x[:n] * S
        yr = engine.duals() * R / sigma if result is _Result.OPTIMAL else np.zeros(m)
        basic_cols = post.kept_cols[engine.basis[engine.basis < n]]

    status = {
        _Result.OPTIMAL: Status.OPTIMAL,
        _Result.INFEASIBLE: Status.INFEASIBLE,
        _Result.UNBOUNDED: Status.UNBOUNDED,
        _Result.LIMIT: Status.ITERATION_LIMIT,
    }[result]
    x, y, d = post.restore(xr, yr)
    primal_res, dual_res = _residuals(p, x, y, d)
    objective = p.objective(x) if status in (Status.OPTIMAL, Status.ITERATION_LIMIT) else math.nan
    elapsed = time.monotonic() - t0
    LOGGER.info("simplex: %s after %d iterations (%d phase 1) in %.2fs, objective %.10g",
                status, iterations, phase1, elapsed, objective)
    return Solution(
        status=status,
        x=x,
        duals=y,
        reduced_costs=d,
        objective=objective,
        iterations=iterations,
        max_primal_residual=primal_res,
        max_dual_residual=dual_res,
        basic_columns=np.sort(basic_cols),
        phase1_iterations=phase1,
        solve_seconds=elapsed,
        message="" if status is Status.OPTIMAL else f"terminated with status {status}",
    )
