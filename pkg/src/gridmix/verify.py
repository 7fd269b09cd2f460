"""Independent checks of a (problem, solution) pair.

Nothing here looks at solver internals: feasibility, duality gap and
complementary slackness are recomputed from the original problem data, the
primal vector and the row duals.  :func:`vertex_oracle` solves tiny LPs by
enumerating basic solutions, as a reference for the simplex.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from gridmix.builder import LpProblem


class OracleSizeError(ValueError):
    """The instance is too large (or not pointed) for vertex enumeration."""


@dataclass
class VerificationReport:
    """Measured residuals plus a verdict per check at the stated tolerance.

    Row residuals are bound violations scaled by ``max(1, |rhs|)``.  The
    complementary-slackness products and the gap are relative to
    ``max(1, |c.x|)`` and dual sign violations to ``max(1, max|c|)``, so MW
    rows and JPY costs are comparable.
    """

    tol: float
    family_residuals: dict[str, float] = field(default_factory=dict)
    max_bound_violation: float = 0.0
    duality_gap_abs: float | None = None
    duality_gap_rel: float | None = None
    max_cs_violation: float | None = None
    max_dual_sign_violation: float | None = None
    checks: dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    @property
    def max_residual(self) -> float:
        return max(self.family_residuals.values(), default=0.0)

    def flagged_families(self) -> list[str]:
        return [f for f, v in self.family_residuals.items() if v > self.tol]

    def merge(self, other: "VerificationReport") -> "VerificationReport":
        out = VerificationReport(tol=max(self.tol, other.tol))
        for rep in (self, other):
            for k, v in rep.family_residuals.items():
                out.family_residuals[k] = max(out.family_residuals.get(k, 0.0), v)
            out.max_bound_violation = max(out.max_bound_violation, rep.max_bound_violation)
            for name in ("duality_gap_abs", "duality_gap_rel", "max_cs_violation", "max_dual_sign_violation"):
                if getattr(rep, name) is not None:
                    setattr(out, name, getattr(rep, name))
            out.checks.update(rep.checks)
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def to_json(self) -> str:
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return str(v)
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            return v
        return json.dumps(clean(self.to_dict()), indent=2, sort_keys=True)

    def to_table(self) -> str:
        lines = [f"{'check':<28}{'value':>14}  verdict"]
        for fam, v in self.family_residuals.items():
            lines.append(f"{'residual ' + fam:<28}{v:>14.3e}  {'ok' if v <= self.tol else 'FAIL'}")
        lines.append(f"{'bound violation':<28}{self.max_bound_violation:>14.3e}  "
                     f"{'ok' if self.checks.get('bounds', True) else 'FAIL'}")
        for label, value, key in (
            ("duality gap (rel)", self.duality_gap_rel, "duality_gap"),
            ("complementary slackness", self.max_cs_violation, "complementary_slackness"),
            ("dual sign", self.max_dual_sign_violation, "dual_sign"),
        ):
            if value is not None:
                lines.append(f"{label:<28}{value:>14.3e}  {'ok' if self.checks.get(key, True) else 'FAIL'}")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'} (tol {self.tol:g})")
        return "\n".join(lines)


def _check_dims(p: LpProblem, x: np.ndarray, y: np.ndarray | None = None) -> None:
    if len(x) != p.num_cols:
        raise ValueError(f"dimension mismatch: {len(x)} primal values for {p.num_cols} columns")
    if y is not None and len(y) != p.num_rows:
        raise ValueError(f"dimension mismatch: {len(y)} duals for {p.num_rows} rows")


def row_violations(p: LpProblem, x: np.ndarray) -> np.ndarray:
    """Per-row violation of the row bounds, scaled by ``max(1, |rhs|)``."""
    act = p.A @ x
    viol = np.maximum(np.maximum(p.row_lower - act, act - p.row_upper), 0.0)
    return viol / np.maximum(1.0, np.abs(p.rhs))


def check_feasibility(p: LpProblem, sol, tol: float = 1e-6) -> VerificationReport:
    x = np.asarray(sol.x, dtype=float)
    _check_dims(p, x)
    viol = row_violations(p, x)
    rep = VerificationReport(tol=tol)
    fams = p.row_families
    for fam in dict.fromkeys(fams):
        rep.family_residuals[str(fam)] = float(viol[fams == fam].max())
    bound = np.maximum(np.maximum(p.lb - x, x - p.ub), 0.0) / np.maximum(1.0, np.abs(x))
    rep.max_bound_violation = float(bound.max(initial=0.0))
    rep.checks["rows"] = rep.max_residual <= tol
    rep.checks["bounds"] = rep.max_bound_violation <= tol
    return rep


def check_optimality(p: LpProblem, sol, tol: float = 1e-6) -> VerificationReport:
    x = np.asarray(sol.x, dtype=float)
    y = np.asarray(sol.duals, dtype=float)
    _check_dims(p, x, y)
    rc = p.c - p.A.T @ y
    primal = float(p.c @ x) + p.obj_offset
    obj_scale = max(1.0, abs(primal))
    cost_scale = max(1.0, float(np.max(np.abs(p.c), initial=0.0)))
    tiny = 1e-12 * cost_scale

    with np.errstate(invalid="ignore"):
        lb_term = np.where(rc > tiny, rc * p.lb, 0.0)
        ub_term = np.where(rc < -tiny, rc * p.ub, 0.0)
    dual = float(p.rhs @ y) + float(np.sum(lb_term) + np.sum(ub_term)) + p.obj_offset
    gap = abs(primal - dual) if math.isfinite(dual) else math.inf

    act = p.A @ x
    slack = np.where(p.senses == "E", 0.0, np.abs(act - p.rhs))
    cs_rows = np.abs(slack * y)
    with np.errstate(invalid="ignore"):
        cs_lo = np.where(np.isfinite(p.lb), (x - p.lb) * np.maximum(rc, 0.0), np.abs(x) * np.maximum(rc, 0.0))
        cs_hi = np.where(np.isfinite(p.ub), (p.ub - x) * np.minimum(rc, 0.0), np.abs(x) * np.minimum(rc, 0.0))
    cs = max(float(cs_rows.max(initial=0.0)), float(np.abs(cs_lo).max(initial=0.0)),
             float(np.abs(cs_hi).max(initial=0.0))) / obj_scale

    sign = np.where(p.senses == "G", np.maximum(-y, 0.0), np.where(p.senses == "L", np.maximum(y, 0.0), 0.0))
    rc_sign = np.where(~np.isfinite(p.lb), np.maximum(rc, 0.0), 0.0) + np.where(~np.isfinite(p.ub),
                                                                                 np.maximum(-rc, 0.0), 0.0)
    sign_viol = max(float(sign.max(initial=0.0)), float(rc_sign.max(initial=0.0))) / cost_scale

    rep = VerificationReport(tol=tol)
    rep.duality_gap_abs = gap
    rep.duality_gap_rel = gap / obj_scale
    rep.max_cs_violation = cs
    rep.max_dual_sign_violation = sign_viol
    rep.checks["duality_gap"] = rep.duality_gap_rel <= tol
    rep.checks["complementary_slackness"] = cs <= tol
    rep.checks["dual_sign"] = sign_viol <= tol
    return rep


def verify(p: LpProblem, sol, tol: float = 1e-6) -> VerificationReport:
    """Feasibility and optimality checks combined."""
    return check_feasibility(p, sol, tol).merge(check_optimality(p, sol, tol))


# ---------------------------------------------------------------- oracle


@dataclass(frozen=True)
class OracleResult:
    status: str  # "Optimal" | "Infeasible" | "Unbounded"
    objective: float
    x: np.ndarray | None
    vertices_examined: int


def _faces(p: LpProblem):
    """Split constraints into always-active hyperplanes and optional faces.

    Returns (E, e_rhs, F, f_rhs) with every constraint written ``a . x = b``.
    """
    A = p.A.toarray()
    n = p.num_cols
    eye = np.eye(n)
    eq_rows, eq_rhs, face_rows, face_rhs = [], [], [], []
    for i in range(p.num_rows):
        (eq_rows if p.senses[i] == "E" else face_rows).append(A[i])
        (eq_rhs if p.senses[i] == "E" else face_rhs).append(p.rhs[i])
    for j in range(n):
        if p.lb[j] == p.ub[j]:
            eq_rows.append(eye[j])
            eq_rhs.append(p.lb[j])
            continue
        for b in (p.lb[j], p.ub[j]):
            if np.isfinite(b):
                face_rows.append(eye[j])
                face_rhs.append(b)
    E = np.array(eq_rows).reshape(-1, n)
    F = np.array(face_rows).reshape(-1, n)
    return E, np.array(eq_rhs, float), F, np.array(face_rhs, float)


def _independent_rows(E: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    keep: list[int] = []
    basis = np.zeros((0, E.shape[1]))
    for i, row in enumerate(E):
        trial = np.vstack([basis, row])
        if np.linalg.matrix_rank(trial, tol=tol * max(1.0, np.abs(trial).max())) > len(keep):
            keep.append(i)
            basis = trial
    return np.array(keep, dtype=int)


def _feasible(p: LpProblem, X: np.ndarray, tol: float) -> np.ndarray:
    """Row/bound feasibility for a batch of points ``X`` (shape k x n)."""
    act = (p.A @ X.T).T
    scale = np.maximum(1.0, np.abs(p.rhs))
    ok = np.all(act >= p.row_lower - tol * scale, axis=1) & np.all(act <= p.row_upper + tol * scale, axis=1)
    bscale = np.maximum(1.0, np.abs(X))
    ok &= np.all(X >= p.lb - tol * bscale, axis=1) & np.all(X <= p.ub + tol * bscale, axis=1)
    return ok


def _nonsingular(M: np.ndarray) -> np.ndarray:
    sign, logdet = np.linalg.slogdet(M)
    norms = np.linalg.norm(M, axis=2)
    with np.errstate(divide="ignore"):
        hadamard = np.sum(np.log(np.maximum(norms, 1e-300)), axis=1)
    return (sign != 0) & (logdet - hadamard > math.log(1e-10))


def vertex_oracle(p: LpProblem, max_columns: int = 12, max_subsets: int = 2_000_000,
                  tol: float = 1e-9, batch: int = 20_000) -> OracleResult:
    """Minimize over all basic solutions of a tiny LP by brute force.

    Every vertex is the solution of ``n`` linearly independent active
    constraints: all equalities plus a subset of inequality faces (row
    hyperplanes and finite column bounds).  Unboundedness is detected by
    enumerating edge directions of the recession cone.
    """
    n = p.num_cols
    if n > max_columns:
        raise OracleSizeError(f"{n} columns exceeds oracle guard of {max_columns}")
    E, e_rhs, F, f_rhs = _faces(p)
    keep = _independent_rows(E) if len(E) else np.zeros(0, int)
    E_ind, e_ind = E[keep], e_rhs[keep]
    r = len(keep)
    if np.linalg.matrix_rank(np.vstack([E, F])) < n:
        raise OracleSizeError("polyhedron has a lineality space; vertex enumeration does not apply")
    need = n - r
    n_faces = len(F)
    if math.comb(n_faces, need) + math.comb(n_faces, max(need - 1, 0)) > max_subsets:
        raise OracleSizeError(f"C({n_faces},{need}) face subsets exceeds guard of {max_subsets}")

    best, best_x, examined = math.inf, None, 0
    combos = itertools.combinations(range(n_faces), need)
    while True:
        chunk = list(itertools.islice(combos, batch))
        if not chunk:
            break
        idx = np.array(chunk, dtype=int).reshape(len(chunk), need)
        M = np.concatenate([np.broadcast_to(E_ind, (len(chunk), r, n)), F[idx]], axis=1)
        rhs = np.concatenate([np.broadcast_to(e_ind, (len(chunk), r)), f_rhs[idx]], axis=1)
        ok = _nonsingular(M)
        if not ok.any():
            continue
        X = np.linalg.solve(M[ok], rhs[ok][..., None])[..., 0]
        examined += len(X)
        feas = _feasible(p, X, tol)
        if feas.any():
            obj = X[feas] @ p.c
            k = int(np.argmin(obj))
            if obj[k] < best:
                best, best_x = float(obj[k]), X[feas][k]

    if best_x is None:
        return OracleResult("Infeasible", math.nan, None, examined)
    if _has_improving_ray(p, E_ind, F, n):
        return OracleResult("Unbounded", -math.inf, None, examined)
    return OracleResult("Optimal", best + p.obj_offset, best_x, examined)


def _has_improving_ray(p: LpProblem, E: np.ndarray, F: np.ndarray, n: int) -> bool:
    """True if some extreme ray of the recession cone decreases the objective.

    ``E`` must have independent rows; a ray direction is the one-dimensional
    null space of ``E`` plus ``n - 1 - rank(E)`` faces.
    """
    k = n - 1 - len(E)
    if k < 0:
        return False
    cnorm = max(1.0, float(np.abs(p.c).max(initial=0.0)))
    A = p.A.toarray()
    for sub in itertools.combinations(range(len(F)), k):
        M = np.vstack([E, F[list(sub)]])
        if len(M):
            _, sv, vt = np.linalg.svd(M)
            if int(np.sum(sv > 1e-10 * max(1.0, sv.max()))) != n - 1:
                continue
            d = vt[-1]
        else:
            d = np.ones(1)
        for dd in (d, -d):
            if dd @ p.c >= -1e-9 * cnorm:
                continue
            ad = A @ dd
            ok = (np.all(ad[p.senses == "L"] <= 1e-9) and np.all(ad[p.senses == "G"] >= -1e-9)
                  and np.all(np.abs(ad[p.senses == "E"]) <= 1e-9)
                  and np.all(dd[np.isfinite(p.lb)] >= -1e-9) and np.all(dd[np.isfinite(p.ub)] <= 1e-9))
            if ok:
                return True
    return False
