import numpy as np
import pytest

from factories import micro, storage, thermal, vre
from gridmix.builder import (
    RESERVE_FAMILIES,
    ROW_FAMILIES,
    BuildOptions,
    RowKey,
    VarKey,
    build,
    census,
    discount_weights,
    family_of,
)
from gridmix.scenario import ScenarioError, builtin_case_study


def row_terms(p, family, index):
    """{column name: coefficient} and rhs of one row."""
    i = p.row_index.number(RowKey(family, tuple(index)))
    row = p.A.tocsr()[i]
    names = p.col_names
    return {names[j]: v for j, v in zip(row.indices, row.data)}, p.rhs[i], p.senses[i]


def test_one_tech_two_slots_has_eight_columns():
    p, idx = build(micro([1.0, 2.0]))
    assert p.num_cols == 8
    counts = {tag: idx.block(tag).size for tag in idx.tags()}
    assert counts == {"Pg": 2, "Ru": 2, "Rd": 2, "Pgcap": 1, "Pginst": 1}


def test_adding_storage_adds_nineteen_columns():
    p0, _ = build(micro([1.0, 2.0]))
    p1, idx = build(micro([1.0, 2.0], storages=[storage()]))
    assert p1.num_cols - p0.num_cols == 19
    assert idx.block("Es").size == 3


def test_curtailment_columns_follow_vre_presence():
    _, idx = build(micro([1.0, 2.0], pv=vre("pv"), pv_profile=[0.2, 0.4]))
    assert idx.block("Pcpv").size == 2
    assert "Pcwp" not in idx


def test_zero_discount_gives_unit_weights():
    s = micro(np.ones((3, 2)), gens=[thermal(years=3)])
    np.testing.assert_array_equal(discount_weights(s), [1.0, 1.0, 1.0])


def test_second_year_weight():
    s = micro(np.ones((2, 2)), gens=[thermal(years=2)], r=0.05)
    assert discount_weights(s)[1] == pytest.approx(1 / 1.1025, rel=1e-15)


def test_objective_hand_evaluation():
    p, idx = build(micro([2.0, 3.0], gens=[thermal(fixed=100.0, var=2.0, g=0.1)]))
    x = np.zeros(p.num_cols)
    x[idx.number(VarKey("Pgcap", (0, 0)))] = 10.0
    x[idx.numbers("Pg").ravel()] = [2.0, 3.0]
    assert p.objective(x) == pytest.approx(110.0)


def test_balance_row_pattern():
    s = micro([7.0, 9.0], gens=[thermal("a"), thermal("b")], storages=[storage()])
    p, _ = build(s)
    terms, rhs, sense = row_terms(p, "Balance", (0, 1))
    assert sense == "E" and rhs == 9.0
    assert terms == {"Pg[0,0,1]": 1.0, "Pg[1,0,1]": 1.0, "Psout[0,0,1]": 1.0, "Psin[0,0,1]": -1.0}


def test_two_years_one_day_gives_48_balance_rows():
    s = micro(np.ones((2, 24)), gens=[thermal(years=2)])
    p, _ = build(s)
    assert p.row_index.block("Balance").size == 48


def test_zero_load_is_feasible_at_zero():
    p, _ = build(micro([0.0, 0.0]))
    x = np.zeros(p.num_cols)
    lhs = p.A @ x
    assert np.all(lhs >= p.row_lower - 1e-12) and np.all(lhs <= p.row_upper + 1e-12)


def test_upward_reserve_requirement_example():
    s = micro([100.0, 100.0], pv=vre("pv"), wp=vre("wp"), pv_profile=[1, 1], wp_profile=[1, 1],
              reserves=True, load_rate=0.03, pv_down=0.10, wp_down=0.08)
    p, _ = build(s)
    terms, rhs, sense = row_terms(p, "ReserveUp", (0, 0))
    required = rhs - terms["Pg[1,0,0]"] * 50.0 - terms["Pg[2,0,0]"] * 25.0
    assert sense == "G"
    assert required == pytest.approx(10.0)


def test_no_vre_requirement_is_load_share():
    p, _ = build(micro([100.0, 50.0], reserves=True, load_rate=0.03))
    terms, rhs, _ = row_terms(p, "ReserveUp", (0, 1))
    assert rhs == pytest.approx(1.5)
    assert all(not k.startswith("Pg[") for k in terms)


def test_reserves_disabled_emits_no_reserve_rows():
    p, _ = build(micro([1.0, 2.0], reserves=False))
    assert not any(f in p.row_index for f in RESERVE_FAMILIES)
    p2, _ = build(micro([1.0, 2.0], reserves=False), BuildOptions(reserves_enabled=True))
    assert all(f in p2.row_index for f in RESERVE_FAMILIES)


def test_pv_definition_row():
    s = micro([1.0, 1.0], pv=vre("pv"), pv_profile=[0.5, 0.0])
    p, idx = build(s)
    terms, rhs, sense = row_terms(p, "PvDef", (0, 0))
    assert sense == "E" and rhs == 0.0
    # Pg + Pcpv = 0.5 * Pgcap, so at Pgcap = 100 the pair sums to 50
    assert terms == {"Pg[1,0,0]": 1.0, "Pcpv[0,0]": 1.0, "Pgcap[1,0]": -0.5}


def test_nuclear_style_capacity_factor_rows():
    s = micro([1.0, 1.0, 1.0], gens=[thermal(cf_min=1.0, cf_max=1.0)])
    p, _ = build(s)
    lo, _, lo_sense = row_terms(p, "CfMin", (0, 0))
    hi, _, hi_sense = row_terms(p, "CfMax", (0, 0))
    assert lo_sense == "G" and hi_sense == "L"
    assert lo["Pgcap[0,0]"] == hi["Pgcap[0,0]"] == -3.0


def test_ramp_row_allows_twenty_percent():
    p, _ = build(micro([1.0, 1.0], gens=[thermal(ramp=0.2)]))
    terms, rhs, sense = row_terms(p, "RampUp", (0, 0, 0))
    assert sense == "L" and rhs == 0.0
    assert terms == {"Pg[0,0,1]": 1.0, "Pg[0,0,0]": -1.0, "Pgcap[0,0]": -0.2}
    # at Pgcap = 10 the step is capped at 2 MW
    assert -terms["Pgcap[0,0]"] * 10.0 == pytest.approx(2.0)


@pytest.mark.parametrize("mu, expected", [(1.0, 60.0), (0.9, 59.0)])
def test_state_of_charge_update(mu, expected):
    p, _ = build(micro([1.0, 1.0], storages=[storage(mu=mu)]))
    terms, rhs, _ = row_terms(p, "SocDyn", (0, 0, 0))
    known = {"Es[0,0,0]": 50.0, "Psin[0,0,0]": 10.0, "Psout[0,0,0]": 0.0}
    rest = sum(terms[k] * v for k, v in known.items())
    assert (rhs - rest) / terms["Es[0,0,1]"] == pytest.approx(expected)


def test_boundary_state_of_charge_rows():
    p, _ = build(micro([1.0, 1.0], storages=[storage()]))
    for end, t in (("start", 0), ("end", 2)):
        terms, rhs, sense = row_terms(p, "SocBound", (0, 0, end))
        assert sense == "E"
        assert terms == {f"Es[0,0,{t}]": 1.0, "Escap[0,0]": -0.5}


def test_capacity_link_accumulates_installs():
    s = micro(np.ones((2, 2)), gens=[thermal(years=2, existing=5.0)])
    p, _ = build(s)
    terms, rhs, _ = row_terms(p, "CapLink", (0, 0))
    assert terms == {"Pgcap[0,0]": 1.0, "Pginst[0,0]": -1.0} and rhs == 5.0
    # existing 5 + installs 3 -> capacity 8
    assert rhs - terms["Pginst[0,0]"] * 3.0 == 8.0
    terms, _, _ = row_terms(p, "CapLink", (0, 1))
    assert terms == {"Pgcap[0,1]": 1.0, "Pginst[0,0]": -1.0, "Pginst[0,1]": -1.0}


def test_adequacy_row_excludes_vre():
    s = micro([60.0, 100.0], pv=vre("pv"), pv_profile=[0, 1], delta=0.08, storages=[storage()])
    p, _ = build(s)
    terms, rhs, sense = row_terms(p, "Adequacy", (0,))
    assert sense == "G" and rhs == pytest.approx(108.0)
    assert set(terms) == {"Pgcap[0,0]", "Pscap[0,0]"}


def test_upper_equal_to_existing_pins_installs():
    p, idx = build(micro([1.0, 1.0], gens=[thermal(existing=4.0, upper=4.0)]))
    j = idx.number(VarKey("Pgcap", (0, 0)))
    assert p.ub[j] == 4.0
    # capacity = 4 + installs <= 4 leaves no room to install


def test_case_study_matches_census():
    s = builtin_case_study(hours=168)
    p, idx = build(s)
    c = census(s)
    assert (c["rows"], c["columns"]) == (p.num_rows, p.num_cols)
    for tag in p.row_index.tags():
        assert c[f"row:{tag}"] == p.row_index.block(tag).size
    for tag in idx.tags():
        assert c[f"col:{tag}"] == idx.block(tag).size


def test_cases_differ_only_by_reserve_rows():
    s = builtin_case_study(hours=48)
    p1, _ = build(s.with_reserves(False))
    p2, _ = build(s.with_reserves(True))
    r1, r2 = set(p1.row_names), set(p2.row_names)
    assert r1 < r2
    assert {family_of(n) for n in r2 - r1} == set(RESERVE_FAMILIES)
    assert p1.col_names == p2.col_names


def test_no_storage_means_no_storage_rows_or_columns():
    p, idx = build(micro([1.0, 2.0]))
    storage_families = {"StorCap", "ChgDown", "DisDown", "StorResUp", "StorResDown", "SocMax", "SocMin",
                        "SocDyn", "SocBound", "PsLink", "EsLink"}
    assert not storage_families & set(p.row_index.tags())
    assert not any(r in idx for r in ("Psin", "Es", "Escap"))


def test_build_is_deterministic_and_costs_nonnegative():
    s = builtin_case_study(hours=24)
    a, _ = build(s)
    b, _ = build(s)
    for u, v in zip(a.triplets(), b.triplets()):
        np.testing.assert_array_equal(u, v)
    assert np.all(a.c >= 0)


def test_every_column_has_a_unique_key():
    p, idx = build(builtin_case_study(hours=24))
    names = p.col_names
    assert len(set(names)) == len(names) == p.num_cols
    for k in (0, 17, p.num_cols - 1):
        assert idx.number(VarKey.parse(names[k])) == k


def test_row_families_in_canonical_order():
    p, _ = build(builtin_case_study(hours=24))
    order = [ROW_FAMILIES.index(t) for t in p.row_index.tags()]
    assert order == sorted(order)


def test_invalid_scenario_and_overflow_raise():
    with pytest.raises(ScenarioError):
        build(micro([1.0, 2.0], gens=[thermal(cf_min=0.9, cf_max=0.1)]))
    with pytest.raises(ScenarioError, match="dimension overflow"):
        build(micro([1.0, 2.0]), BuildOptions(max_columns=4))
