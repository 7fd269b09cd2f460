"""Small scenario builders shared by the test modules."""

from __future__ import annotations

import time

import numpy as np

from gridmix.builder import build, make_problem
from gridmix.simplex import solve
from gridmix.scenario import (
    GeneratorTech,
    GlobalParams,
    ReserveParams,
    Scenario,
    StorageTech,
    TimeSeriesInputs,
    builtin_case_study,
    stress_scenario,
)


def thermal(name="gas", *, fixed=100.0, var=2.0, upper=50.0, existing=0.0, years=1, g=0.1,
            cf_min=None, cf_max=None, ramp=None, reserve=0.0) -> GeneratorTech:
    return GeneratorTech(name, False, g, (fixed,) * years, (var,) * years, upper, (existing,) * years,
                         cf_min, cf_max, ramp, ramp, reserve, reserve)


def vre(name, *, fixed=100.0, upper=100.0, existing=0.0, years=1, g=0.1) -> GeneratorTech:
    return GeneratorTech(name, True, g, (fixed,) * years, (0.0,) * years, upper, (existing,) * years)


def storage(name="bat", *, years=1, mu=0.9, p_fixed=10.0, e_fixed=1.0, p_upper=20.0, e_upper=80.0,
            p_exist=0.0, e_exist=0.0, rate=0.5) -> StorageTech:
    return StorageTech(name, 0.1, 0.1, (p_fixed,) * years, (e_fixed,) * years, mu, p_upper, e_upper,
                       (p_exist,) * years, (e_exist,) * years, rate, rate)


def micro(load, *, gens=None, storages=(), pv=None, wp=None, pv_profile=None, wp_profile=None,
          r=0.0, delta=0.0, reserves=False, name="micro", **reserve_kw) -> Scenario:
    """Scenario around ``load`` (1-D for one year, 2-D for several)."""
    load = np.atleast_2d(np.asarray(load, dtype=float))
    ny, nt = load.shape
    gens = list(gens if gens is not None else [thermal(years=ny)])
    pv_index = wp_index = None
    if pv is not None:
        pv_index = len(gens)
        gens.append(pv)
    if wp is not None:
        wp_index = len(gens)
        gens.append(wp)
    series = TimeSeriesInputs(
        load=load,
        pv_profile=np.zeros(nt) if pv_profile is None else np.asarray(pv_profile, float),
        wp_profile=np.zeros(nt) if wp_profile is None else np.asarray(wp_profile, float),
    )
    return Scenario(GlobalParams(r, delta, ny, nt), tuple(gens), tuple(storages), series,
                    ReserveParams(enabled=reserves, **reserve_kw), pv_index, wp_index, name)


def micro_family() -> list[tuple[str, Scenario]]:
    """Energy-model instances small enough for vertex enumeration (<= 12 columns)."""
    out = [
        ("single_tech_two_slots", micro([3.0, 5.0])),
        ("single_tech_with_existing", micro([3.0, 5.0], gens=[thermal(existing=2.0, upper=6.0)])),
        ("single_tech_margin", micro([4.0, 1.0], delta=0.25)),
        ("single_tech_cf_max", micro([2.0, 2.0], gens=[thermal(cf_max=0.8)])),
        ("single_tech_cf_min", micro([3.0, 4.0], gens=[thermal(cf_min=0.7)])),
        ("single_tech_ramp", micro([1.0, 6.0], gens=[thermal(ramp=0.5, upper=20.0)])),
        ("single_tech_reserves", micro([3.0, 5.0], gens=[thermal(reserve=0.2)], reserves=True, load_rate=0.1)),
        ("single_tech_tight_upper", micro([5.0, 5.0], gens=[thermal(upper=5.0)])),
        ("single_tech_cheap_capacity", micro([3.0, 9.0], gens=[thermal(fixed=1.0, var=50.0)])),
        ("single_tech_discounted", micro([2.0, 3.0], gens=[thermal(existing=1.0, upper=4.0)], r=0.05)),
        ("infeasible_cf_min", micro([1.0, 4.0], gens=[thermal(cf_min=0.7)])),
        ("infeasible_upper", micro([5.0, 8.0], gens=[thermal(upper=6.0)])),
        ("infeasible_cf", micro([0.0, 4.0], gens=[thermal(cf_max=0.3, upper=4.0, existing=4.0)])),
    ]
    return out


def odd_problem():
    """Free, negative, fixed and upper-bounded columns with awkward coefficients."""
    c = [1 / 3, -2.0, 0.1, 0.0, np.pi]
    rows = [0, 0, 1, 1, 2, 2, 2]
    cols = [0, 1, 1, 2, 0, 3, 4]
    vals = [1 / 3, 1e-17, 7.0, -1 / 7, 2.0 ** 60, -1.0, 1e300]
    return make_problem(c, rows, cols, vals, "ELG", [1 / 3, -5.0, 0.0],
                        lb=[-np.inf, 0.0, -3.0, 2.5, -np.inf], ub=[np.inf, 7.5, -1.0, 2.5, 4.0],
                        name="odd", obj_offset=12.5)


def multi_year_micro():
    s = micro(np.array([[3.0, 5.0, 4.0], [4.0, 6.0, 5.0]]), gens=[thermal(years=2, cf_min=0.1, cf_max=0.9, ramp=0.5)],
              storages=[storage(years=2)], pv=vre("pv", years=2), wp=vre("wp", years=2),
              pv_profile=[0.0, 0.7, 0.2], wp_profile=[0.3, 0.1, 0.5], r=0.04, reserves=True)
    return build(s)[0]


def mps_problem_set() -> dict:
    """Five problems that together use every row family, plus awkward bounds and numbers."""
    return {
        "case_study_reserves": lambda: build(builtin_case_study(hours=24))[0],
        "case_study_no_reserves": lambda: build(builtin_case_study(hours=24, reserves=False))[0],
        "stress_day": lambda: build(stress_scenario())[0],
        "multi_year_micro": multi_year_micro,
        "odd_bounds": odd_problem,
    }


class Run:
    """A scenario built and solved once, with wall-clock solve time."""

    def __init__(self, s, label=None):
        self.label = label or s.name
        self.scenario = s
        self.problem, self.index = build(s)
        t0 = time.perf_counter()
        self.solution = solve(self.problem)
        self.seconds = time.perf_counter() - t0

    def values(self, role):
        return self.solution.x[self.index.numbers(role)]
