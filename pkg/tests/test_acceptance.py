"""Acceptance suite: one check per criterion, each reporting a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` (the summary lines are
printed at the end of the session) or ``python tests/test_acceptance.py``.
"""

import sys

import numpy as np
import pytest

from factories import Run, micro_family, mps_problem_set
from gridmix.builder import make_problem
from gridmix.mps import problems_equal, read_mps, write_mps
from gridmix.report import extract_report, recomposition_error
from gridmix.simplex import solve
from gridmix.verify import check_feasibility, check_optimality, vertex_oracle

TOL = 1e-6
RESULTS: dict[int, tuple[bool, str]] = {}


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def micro_runs():
    return [Run(s, name) for name, s in micro_family()]


@pytest.fixture(scope="module")
def solved_runs(case_study_runs, stress_runs, micro_runs):
    runs = list(case_study_runs.values()) + list(stress_runs.values()) + micro_runs
    return [r for r in runs if r.solution.optimal]


def test_criterion_1_reserve_constraints_never_lower_cost(case_study_runs):
    c1, c2 = case_study_runs[False], case_study_runs[True]
    o1, o2 = c1.solution.objective, c2.solution.objective
    ok = (c1.solution.optimal and c2.solution.optimal and o2 >= o1 - TOL * abs(o1)
          and max(c1.seconds, c2.seconds) < 60.0)
    record(1, ok, f"objective case1={o1:.10g} case2={o2:.10g}; solve {c1.seconds:.1f}s / {c2.seconds:.1f}s")


def annual(run, role):
    return float(run.values(role).sum()) * run.scenario.globals.timeslot_hours


def test_criterion_2_curtailment_direction(stress_runs):
    c1, c2 = stress_runs[False], stress_runs[True]
    pv1, pv2 = annual(c1, "Pcpv"), annual(c2, "Pcpv")
    wp1, wp2 = annual(c1, "Pcwp"), annual(c2, "Pcwp")
    slack = lambda v: TOL * max(1.0, abs(v))  # noqa: E731
    ok = c1.solution.optimal and c2.solution.optimal and pv2 >= pv1 - slack(pv1) and wp2 <= wp1 + slack(wp1)
    record(2, ok, f"PV curtailment {pv1:.3f} -> {pv2:.3f} MWh, WP curtailment {wp1:.3f} -> {wp2:.3f} MWh")


def optimal_face_range(run, role, rel=1e-9):
    """Min and max of the total of ``role`` over (nearly) optimal solutions."""
    p = run.problem
    rows, cols, vals = p.triplets()
    obj_cols = np.flatnonzero(p.c)
    m = p.num_rows
    rows = np.concatenate([rows, np.full(obj_cols.size, m)])
    cols = np.concatenate([cols, obj_cols])
    vals = np.concatenate([vals, p.c[obj_cols]])
    cap = run.solution.objective * (1 + rel) + rel
    target = np.zeros(p.num_cols)
    target[run.index.numbers(role).ravel()] = 1.0
    out = []
    for sign in (1.0, -1.0):
        q = make_problem(sign * target, rows, cols, vals, np.append(p.senses, "L"), np.append(p.rhs, cap),
                         p.lb, p.ub, shape=(m + 1, p.num_cols))
        sol = solve(q)
        assert sol.optimal
        out.append(sign * sol.objective)
    return tuple(out)


def test_curtailment_direction_holds_for_every_optimal_split(stress_runs):
    """Case 1 can split curtailment between PV and wind freely; compare against its extremes."""
    lo1, hi1 = optimal_face_range(stress_runs[False], "Pcpv")
    lo2, _ = optimal_face_range(stress_runs[True], "Pcpv")
    assert lo2 > hi1
    wlo1, _ = optimal_face_range(stress_runs[False], "Pcwp")
    _, whi2 = optimal_face_range(stress_runs[True], "Pcwp")
    assert whi2 <= wlo1 + 0.1


def test_criterion_3_feasibility_residuals(solved_runs):
    worst, where = 0.0, ""
    families = set()
    for run in solved_runs:
        rep = check_feasibility(run.problem, run.solution, TOL)
        families |= set(rep.family_residuals)
        for fam, v in rep.family_residuals.items():
            if v > worst:
                worst, where = v, f"{run.label}/{fam}"
        worst = max(worst, rep.max_bound_violation)
    record(3, worst <= TOL, f"{len(solved_runs)} runs, {len(families)} row families, "
                            f"max scaled residual {worst:.2e} ({where or 'none'})")


def test_criterion_4_optimality(solved_runs):
    gap = cs = 0.0
    for run in solved_runs:
        rep = check_optimality(run.problem, run.solution, TOL)
        gap = max(gap, rep.duality_gap_rel)
        cs = max(cs, rep.max_cs_violation)
    record(4, gap <= TOL and cs <= TOL, f"{len(solved_runs)} runs, max relative gap {gap:.2e}, "
                                        f"max complementary slackness {cs:.2e}")


def test_criterion_5_oracle_equivalence(micro_runs):
    matched, worst, bad = 0, 0.0, []
    for run in micro_runs:
        assert run.problem.num_cols <= 12
        ref = vertex_oracle(run.problem)
        if ref.status != run.solution.status.value:
            bad.append(run.label)
            continue
        if ref.status == "Optimal":
            err = abs(ref.objective - run.solution.objective)
            worst = max(worst, err)
            if err <= 1e-7:
                matched += 1
            else:
                bad.append(run.label)
    ok = matched >= 10 and not bad
    record(5, ok, f"{matched} optimal instances match (max |diff| {worst:.1e}), "
                  f"{len(micro_runs) - matched - len(bad)} infeasible agree, mismatches {bad or 'none'}")


def test_criterion_6_nuclear_runs_flat(case_study_runs):
    worst = 0.0
    for run in case_study_runs.values():
        i = run.scenario.generator_index("nuclear")
        pg, cap = run.values("Pg")[i], run.values("Pgcap")[i]
        worst = max(worst, float(np.abs(pg - cap[:, None]).max()))
    record(6, worst <= TOL, f"max |Pg - Pgcap| for nuclear {worst:.2e} MW")


def test_criterion_7_storage_boundary_and_floor(case_study_runs, stress_runs):
    end_err = floor = 0.0
    for run in list(case_study_runs.values()) + list(stress_runs.values()):
        es, cap = run.values("Es"), run.values("Escap")
        for j, st in enumerate(run.scenario.storages):
            target = st.soc_boundary * cap[j]
            end_err = max(end_err, float(np.abs(es[j, :, 0] - target).max()), float(np.abs(es[j, :, -1] - target).max()))
            floor = max(floor, float((st.soc_min * cap[j][:, None] - es[j]).max()))
    ok = end_err <= TOL and floor <= TOL
    record(7, ok, f"max |Es(0|T) - 0.5 Escap| {end_err:.2e}, max shortfall below 0.2 Escap {max(floor, 0.0):.2e}")


def test_criterion_8_mps_round_trip(tmp_path):
    problems = mps_problem_set()
    families, exact = set(), []
    for name, make in problems.items():
        p = make()
        if p.row_index is not None:
            families |= set(p.row_index.tags())
        q = read_mps(write_mps(p, tmp_path / f"{name}.mps"))
        exact.append(problems_equal(p, q) and q.col_names == p.col_names and q.row_names == p.row_names)
    from gridmix.builder import ROW_FAMILIES
    ok = all(exact) and len(problems) == 5 and families == set(ROW_FAMILIES)
    record(8, ok, f"{sum(exact)}/{len(problems)} problems bit-identical, {len(families)} row families covered")


def test_criterion_9_objective_recomposition(solved_runs):
    worst = 0.0
    for run in solved_runs:
        rep = extract_report(run.scenario, run.index, run.solution, run.problem)
        worst = max(worst, recomposition_error(rep))
    record(9, worst <= 1e-9, f"{len(solved_runs)} runs, max relative error {worst:.2e}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
