import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from factories import micro, thermal
from gridmix.builder import build, make_problem
from gridmix.scenario import builtin_case_study
from gridmix.simplex import SolverOptions, Status, solve
from gridmix.verify import verify, vertex_oracle


def dense_problem(c, A, senses, b, lb=None, ub=None):
    A = np.asarray(A, float)
    r, k = np.nonzero(A)
    return make_problem(c, r, k, A[r, k], senses, b, lb, ub, shape=A.shape)


def test_single_column_at_upper_bound():
    p = make_problem([-1.0], [], [], [], [], [], lb=[0.0], ub=[5.0], shape=(0, 1))
    sol = solve(p)
    assert sol.status is Status.OPTIMAL
    assert sol.x[0] == 5.0 and sol.objective == -5.0
    assert sol.reduced_costs[0] == -1.0


def test_symmetric_covering_row_dual():
    p = dense_problem([1.0, 1.0], [[1.0, 1.0]], "G", [1.0])
    sol = solve(p)
    assert sol.objective == pytest.approx(1.0)
    assert sol.duals[0] == pytest.approx(1.0)


def test_contradictory_rows_are_infeasible():
    p = dense_problem([1.0], [[1.0], [1.0]], "GL", [2.0, 1.0])
    assert solve(p).status is Status.INFEASIBLE
    assert solve(p, SolverOptions(presolve=False)).status is Status.INFEASIBLE


def test_unbounded_direction_detected():
    p = dense_problem([-1.0, 0.0], [[1.0, -1.0]], "L", [1.0])
    assert solve(p).status is Status.UNBOUNDED


def test_free_and_negative_bounded_columns():
    # min x - y, x free, -3 <= y <= -1, x + y >= -10  -> x = -10 - y, objective -10 - 2y, best y = -1
    p = dense_problem([1.0, -1.0], [[1.0, 1.0]], "G", [-10.0], lb=[-np.inf, -3.0], ub=[np.inf, -1.0])
    sol = solve(p)
    assert sol.objective == pytest.approx(-8.0)
    assert sol.x == pytest.approx([-9.0, -1.0])


def test_equality_and_range_of_senses():
    # a small transportation problem: 2 sources, 2 sinks
    c = [4.0, 6.0, 5.0, 3.0]
    A = [[1, 1, 0, 0], [0, 0, 1, 1], [1, 0, 1, 0], [0, 1, 0, 1]]
    p = dense_problem(c, A, "LLEE", [30.0, 25.0, 20.0, 25.0])
    sol = solve(p)
    assert sol.objective == pytest.approx(4 * 20 + 3 * 25)
    assert verify(p, sol, 1e-9).passed


def test_micro_energy_instance_matches_oracle():
    p, _ = build(micro([3.0, 5.0]))
    assert p.num_cols == 8
    sol = solve(p)
    assert sol.objective == pytest.approx(vertex_oracle(p).objective, rel=1e-9, abs=1e-9)


def test_beale_cycling_example():
    # Beale's LP cycles under textbook Dantzig pricing with naive tie-breaking
    c = [0, 0, 0, -0.75, 150, -0.02, 6]
    A = [[1, 0, 0, 0.25, -60, -0.04, 9], [0, 1, 0, 0.5, -90, -0.02, 3], [0, 0, 1, 0, 0, 1, 0]]
    p = dense_problem(c, A, "EEE", [0, 0, 1])
    for opts in (SolverOptions(), SolverOptions(presolve=False, scaling=False)):
        sol = solve(p, opts)
        assert sol.status is Status.OPTIMAL
        assert sol.objective == pytest.approx(-0.05)


def test_highly_degenerate_assignment():
    n = 5
    rng = np.random.default_rng(3)
    cost = rng.integers(1, 4, size=(n, n)).astype(float)
    A = np.zeros((2 * n, n * n))
    for i in range(n):
        A[i, i * n:(i + 1) * n] = 1
        A[n + i, i::n] = 1
    p = dense_problem(cost.ravel(), A, "E" * 2 * n, np.ones(2 * n))
    sol = solve(p, SolverOptions(anti_cycling=True))
    from scipy.optimize import linear_sum_assignment
    r, k = linear_sum_assignment(cost)
    assert sol.objective == pytest.approx(cost[r, k].sum())


def test_iteration_limit_is_reported():
    p, _ = build(builtin_case_study(hours=24))
    sol = solve(p, SolverOptions(max_iterations=5))
    assert sol.status is Status.ITERATION_LIMIT


def test_refactor_interval_does_not_change_answer():
    p, _ = build(builtin_case_study(hours=24))
    a = solve(p)
    b = solve(p, SolverOptions(refactor_interval=7))
    assert b.objective == pytest.approx(a.objective, rel=1e-9)


def test_invalid_options_rejected():
    with pytest.raises(ValueError):
        SolverOptions(feasibility_tol=0.0)
    with pytest.raises(ValueError):
        SolverOptions(refactor_interval=0)


@st.composite
def feasible_lps(draw):
    m = draw(st.integers(1, 5))
    n = draw(st.integers(1, 6))
    vals = st.integers(-4, 4).map(float)
    A = np.array(draw(st.lists(st.lists(vals, min_size=n, max_size=n), min_size=m, max_size=m)))
    x0 = np.array(draw(st.lists(st.integers(0, 3).map(float), min_size=n, max_size=n)))
    slack = np.array(draw(st.lists(st.integers(0, 2).map(float), min_size=m, max_size=m)))
    senses = "".join(draw(st.lists(st.sampled_from("LGE"), min_size=m, max_size=m)))
    b = A @ x0 + np.array([{"L": s, "G": -s, "E": 0.0}[k] for s, k in zip(slack, senses)])
    c = np.array(draw(st.lists(st.integers(-3, 5).map(float), min_size=n, max_size=n)))
    ub = np.full(n, 6.0)
    row_scale = np.array(draw(st.lists(st.sampled_from([1e-3, 0.5, 1.0, 8.0, 1e4]), min_size=m, max_size=m)))
    col_scale = np.array(draw(st.lists(st.sampled_from([1e-2, 1.0, 3.0, 1e3]), min_size=n, max_size=n)))
    return c, A, senses, b, ub, row_scale, col_scale


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(feasible_lps())
def test_objective_invariant_under_row_and_column_scaling(case):
    c, A, senses, b, ub, rs, cs = case
    base = solve(dense_problem(c, A, senses, b, ub=ub))
    # x = D y: columns scaled by cs, rows by rs
    scaled = dense_problem(c * cs, (A * rs[:, None]) * cs[None, :], senses, b * rs, ub=ub / cs)
    other = solve(scaled)
    assert base.status is Status.OPTIMAL and other.status is Status.OPTIMAL
    assert other.objective == pytest.approx(base.objective, rel=1e-7, abs=1e-7)
    assert verify(dense_problem(c, A, senses, b, ub=ub), base, 1e-7).passed


@settings(max_examples=40, deadline=None)
@given(feasible_lps())
def test_matches_reference_solver(case):
    from scipy.optimize import linprog
    c, A, senses, b, ub, _, _ = case
    s = np.array(list(senses))
    A_ub = np.vstack([A[s == "L"], -A[s == "G"]])
    b_ub = np.concatenate([b[s == "L"], -b[s == "G"]])
    ref = linprog(c, A_ub=A_ub if len(A_ub) else None, b_ub=b_ub if len(b_ub) else None,
                  A_eq=A[s == "E"] if (s == "E").any() else None, b_eq=b[s == "E"] if (s == "E").any() else None,
                  bounds=list(zip(np.zeros(len(c)), ub)), method="highs")
    sol = solve(dense_problem(c, A, senses, b, ub=ub))
    assert ref.status == 0
    assert sol.objective == pytest.approx(ref.fun, rel=1e-7, abs=1e-7)
