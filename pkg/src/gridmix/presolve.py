"""Light presolve: fixed columns, empty rows and row singletons.

The reduced problem is expressed with row bounds (``row_lo <= A x <= row_hi``)
rather than senses.  :class:`Postsolve` maps a reduced primal/dual pair back
to the original index space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from gridmix.builder import LpProblem

_BOUND_TOL = 1e-9


class PresolveInfeasible(Exception):
    """Raised when presolve proves the problem has no feasible point."""


@dataclass(frozen=True)
class _Singleton:
    row: int
    col: int
    coef: float
    implied_lo: float
    implied_hi: float


@dataclass
class ReducedProblem:
    c: np.ndarray
    A: sp.csc_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    obj_offset: float

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape


@dataclass
class Postsolve:
    original: LpProblem
    kept_rows: np.ndarray
    kept_cols: np.ndarray
    fixed: dict[int, float] = field(default_factory=dict)
    singletons: list[_Singleton] = field(default_factory=list)
    empty_rows: list[int] = field(default_factory=list)

    def restore(self, x_red: np.ndarray, y_red: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Full-space primal values, row duals and reduced costs."""
        p = self.original
        x = np.zeros(p.num_cols)
        x[self.kept_cols] = x_red
        for j, v in self.fixed.items():
            x[j] = v
        y = np.zeros(p.num_rows)
        y[self.kept_rows] = y_red
        A = p.A
        for rec in reversed(self.singletons):
            j = rec.col
            lo, hi = A.indptr[j], A.indptr[j + 1]
            d_j = p.c[j] - A.data[lo:hi] @ y[A.indices[lo:hi]]
            scale = max(1.0, abs(x[j]))
            at_lo = np.isfinite(rec.implied_lo) and abs(x[j] - rec.implied_lo) <= _BOUND_TOL * scale
            at_hi = np.isfinite(rec.implied_hi) and abs(x[j] - rec.implied_hi) <= _BOUND_TOL * scale
            if (at_lo and d_j > 0) or (at_hi and d_j < 0):
                y[rec.row] = d_j / rec.coef
        d = p.c - A.T @ y
        return x, y, d


def _row_bounds(p: LpProblem) -> tuple[np.ndarray, np.ndarray]:
    lo = np.where(p.senses == "L", -np.inf, p.rhs).astype(float)
    hi = np.where(p.senses == "G", np.inf, p.rhs).astype(float)
    return lo, hi


def presolve(p: LpProblem) -> tuple[ReducedProblem, Postsolve]:
    """Remove fixed columns, empty rows and singleton rows until none remain.

    Raises :class:`PresolveInfeasible` on contradictory bounds or an empty row
    whose bounds exclude zero.
    """
    m, n = p.A.shape
    row_lo, row_hi = _row_bounds(p)
    lb, ub = p.lb.astype(float).copy(), p.ub.astype(float).copy()
    bad = np.flatnonzero(lb > ub)
    if bad.size:
        raise PresolveInfeasible(f"column {bad[0]} has lower bound above upper bound")

    csc = p.A.tocsc()
    csr = p.A.tocsr()
    row_alive = np.ones(m, dtype=bool)
    col_alive = np.ones(n, dtype=bool)
    row_count = np.diff(csr.indptr).astype(np.int64)
    post = Postsolve(p, np.zeros(0, np.int64), np.zeros(0, np.int64))
    offset = 0.0

    def tol_of(v: float) -> float:
        return _BOUND_TOL * max(1.0, abs(v))

    def remove_column(j: int, value: float) -> None:
        nonlocal offset
        col_alive[j] = False
        post.fixed[j] = value
        offset += p.c[j] * value
        lo, hi = csc.indptr[j], csc.indptr[j + 1]
        rows, vals = csc.indices[lo:hi], csc.data[lo:hi]
        live = row_alive[rows]
        rows, vals = rows[live], vals[live]
        row_lo[rows] -= vals * value
        row_hi[rows] -= vals * value
        np.subtract.at(row_count, rows, 1)

    queue_cols = list(np.flatnonzero(lb == ub))
    queue_rows = list(np.flatnonzero(row_count <= 1))
    while queue_cols or queue_rows:
        while queue_cols:
            j = int(queue_cols.pop())
            if col_alive[j]:
                remove_column(j, float(lb[j]))
                lo, hi = csc.indptr[j], csc.indptr[j + 1]
                for i in csc.indices[lo:hi]:
                    if row_alive[i] and row_count[i] <= 1:
                        queue_rows.append(int(i))
        while queue_rows:
            i = int(queue_rows.pop())
            if not row_alive[i] or row_count[i] > 1:
                continue
            if row_count[i] == 0:
                if row_lo[i] > tol_of(row_lo[i]) or row_hi[i] < -tol_of(row_hi[i]):
                    raise PresolveInfeasible(f"empty row {i} requires {row_lo[i]} <= 0 <= {row_hi[i]}")
                row_alive[i] = False
                post.empty_rows.append(i)
                continue
            lo, hi = csr.indptr[i], csr.indptr[i + 1]
            cols, vals = csr.indices[lo:hi], csr.data[lo:hi]
            live = col_alive[cols]
            j, a = int(cols[live][0]), float(vals[live][0])
            if a > 0:
                ilo, ihi = row_lo[i] / a, row_hi[i] / a
            else:
                ilo, ihi = row_hi[i] / a, row_lo[i] / a
            new_lb, new_ub = max(lb[j], ilo), min(ub[j], ihi)
            if new_lb > new_ub + tol_of(new_ub):
                raise PresolveInfeasible(f"row {i} contradicts the bounds of column {j}")
            if new_lb > new_ub:
                new_lb = new_ub = 0.5 * (new_lb + new_ub)
            lb[j], ub[j] = new_lb, new_ub
            row_alive[i] = False
            row_count[i] = 0
            post.singletons.append(_Singleton(i, j, a, ilo, ihi))
            if lb[j] == ub[j]:
                queue_cols.append(j)

    kept_rows = np.flatnonzero(row_alive)
    kept_cols = np.flatnonzero(col_alive)
    post.kept_rows, post.kept_cols = kept_rows, kept_cols
    A_red = csc[kept_rows][:, kept_cols].tocsc()
    A_red.sort_indices()
    reduced = ReducedProblem(
        c=p.c[kept_cols].astype(float),
        A=A_red,
        row_lo=row_lo[kept_rows],
        row_hi=row_hi[kept_rows],
        lb=lb[kept_cols],
        ub=ub[kept_cols],
        obj_offset=offset + p.obj_offset,
    )
    return reduced, post
