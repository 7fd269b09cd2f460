"""Turn a solved model into an energy-mix report and compare two cases."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from gridmix.builder import LpProblem, VarIndex, discount_weights
from gridmix.scenario import Scenario
from gridmix.simplex import Solution, Status


class ReportError(ValueError):
    """Raised for non-optimal solutions or incompatible reports."""


@dataclass(frozen=True)
class EnergyMixReport:
    scenario_name: str
    generator_names: tuple[str, ...]
    storage_names: tuple[str, ...]
    reserves_enabled: bool
    timeslot_hours: float
    discount_weights: np.ndarray  # (ny,)
    load: np.ndarray  # (ny, nt)
    # capacities and installs, generators (nI, ny), storages (nJ, ny)
    gen_capacity: np.ndarray
    gen_installed: np.ndarray
    storage_power: np.ndarray
    storage_power_installed: np.ndarray
    storage_energy: np.ndarray
    storage_energy_installed: np.ndarray
    dispatch: np.ndarray  # Pg (nI, ny, nt)
    charge: np.ndarray  # Psin (nJ, ny, nt)
    discharge: np.ndarray  # Psout (nJ, ny, nt)
    soc: np.ndarray  # Es (nJ, ny, nt + 1)
    pv_curtailment: np.ndarray  # (ny, nt)
    wp_curtailment: np.ndarray
    reserves: dict[str, np.ndarray]  # role -> (entities, ny, nt)
    reserve_required_up: np.ndarray  # (ny, nt)
    reserve_required_down: np.ndarray
    prices: np.ndarray  # (ny, nt) JPY/MWh, undiscounted
    gen_fixed_cost: np.ndarray  # (nI, ny)
    gen_variable_cost: np.ndarray  # (nI, ny)
    storage_fixed_cost: np.ndarray  # (nJ, ny), the ASC terms
    objective: float
    iterations: int = 0
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def num_years(self) -> int:
        return self.load.shape[0]

    @property
    def num_timeslots(self) -> int:
        return self.load.shape[1]

    @property
    def annual_cost(self) -> np.ndarray:
        """AC_y: generator fixed + variable costs plus storage fixed costs."""
        return self.gen_fixed_cost.sum(0) + self.gen_variable_cost.sum(0) + self.storage_fixed_cost.sum(0)

    @property
    def discounted_total(self) -> float:
        return float(self.annual_cost @ self.discount_weights)

    @property
    def pv_curtailment_annual(self) -> np.ndarray:
        """MWh per year."""
        return self.pv_curtailment.sum(1) * self.timeslot_hours

    @property
    def wp_curtailment_annual(self) -> np.ndarray:
        return self.wp_curtailment.sum(1) * self.timeslot_hours

    @property
    def reserve_provided_up(self) -> np.ndarray:
        return sum(self.reserves[r].sum(0) for r in ("Ru", "Rscd", "Rsdu"))

    @property
    def reserve_provided_down(self) -> np.ndarray:
        return sum(self.reserves[r].sum(0) for r in ("Rd", "Rscu", "Rsdd"))

    def capacity_table(self, year: int = -1) -> list[tuple[str, float]]:
        """Rows in the layout of an optimal-capacity table."""
        rows = [(f"{n} [MW]", float(self.gen_capacity[i, year])) for i, n in enumerate(self.generator_names)]
        for j, n in enumerate(self.storage_names):
            rows.append((f"{n} (Power) [MW]", float(self.storage_power[j, year])))
            rows.append((f"{n} (Energy) [MWh]", float(self.storage_energy[j, year])))
        return rows


def _take(x: np.ndarray, idx: VarIndex, role: str) -> np.ndarray:
    return np.asarray(x[idx.numbers(role)], dtype=float)


def extract_report(s: Scenario, idx: VarIndex, sol: Solution, problem: LpProblem | None = None) -> EnergyMixReport:
    """Read capacities, dispatch, curtailment, reserves, prices and costs off ``sol``.

    Prices are Balance-row duals divided by the discount weight and slot
    length, i.e. undiscounted JPY per MWh of extra load.  ``problem`` is used
    to locate the Balance rows and the reserve switch when given; otherwise
    the builder's layout (Balance rows first) and the scenario flag apply.
    """
    if sol.status is not Status.OPTIMAL:
        raise ReportError(f"cannot report a solution with status {sol.status.value}")
    x = np.asarray(sol.x, dtype=float)
    ny, nt = s.num_years, s.num_timeslots
    h = s.globals.timeslot_hours
    fw = s.globals.fixed_cost_weight
    w = discount_weights(s)

    if problem is not None and problem.row_index is not None:
        balance = problem.row_index.numbers("Balance")
        reserves_enabled = "ReserveUp" in problem.row_index
    else:
        balance = np.arange(ny * nt).reshape(ny, nt)
        reserves_enabled = s.reserves.enabled
    duals = np.asarray(sol.duals, dtype=float)
    prices = duals[balance] / (w[:, None] * h) if duals.size else np.full((ny, nt), np.nan)

    pg = _take(x, idx, "Pg")
    pgcap = _take(x, idx, "Pgcap")
    pscap, escap = _take(x, idx, "Pscap"), _take(x, idx, "Escap")
    zeros = np.zeros((ny, nt))
    pcpv = _take(x, idx, "Pcpv").reshape(ny, nt) if s.pv_index is not None else zeros
    pcwp = _take(x, idx, "Pcwp").reshape(ny, nt) if s.wp_index is not None else zeros

    n_i, n_j = len(s.generators), len(s.storages)
    gen_fixed = np.zeros((n_i, ny))
    gen_var = np.zeros((n_i, ny))
    for i, g in enumerate(s.generators):
        gen_fixed[i] = g.annual_expense_rate * np.asarray(g.fixed_cost) * fw * pgcap[i]
        gen_var[i] = np.asarray(g.variable_cost) * h * pg[i].sum(1)
    sto_fixed = np.zeros((n_j, ny))
    for j, st in enumerate(s.storages):
        sto_fixed[j] = (st.power_expense_rate * np.asarray(st.power_fixed_cost) * pscap[j]
                        + st.energy_expense_rate * np.asarray(st.energy_fixed_cost) * escap[j]) * fw

    rp = s.reserves
    load = np.asarray(s.series.load, dtype=float)
    pv_out = pg[s.pv_index] if s.pv_index is not None else zeros
    wp_out = pg[s.wp_index] if s.wp_index is not None else zeros
    req_up = rp.load_rate_up * load + rp.pv_down * pv_out + rp.wp_down * wp_out
    req_down = rp.effective_load_rate_down * load + rp.pv_up * pv_out + rp.wp_up * wp_out

    return EnergyMixReport(
        scenario_name=s.name,
        generator_names=tuple(g.name for g in s.generators),
        storage_names=tuple(st.name for st in s.storages),
        reserves_enabled=bool(reserves_enabled),
        timeslot_hours=h,
        discount_weights=w,
        load=load,
        gen_capacity=pgcap,
        gen_installed=_take(x, idx, "Pginst"),
        storage_power=pscap,
        storage_power_installed=_take(x, idx, "Psinst"),
        storage_energy=escap,
        storage_energy_installed=_take(x, idx, "Esinst"),
        dispatch=pg,
        charge=_take(x, idx, "Psin"),
        discharge=_take(x, idx, "Psout"),
        soc=_take(x, idx, "Es"),
        pv_curtailment=pcpv,
        wp_curtailment=pcwp,
        reserves={r: _take(x, idx, r) for r in ("Ru", "Rd", "Rscu", "Rscd", "Rsdu", "Rsdd")},
        reserve_required_up=req_up,
        reserve_required_down=req_down,
        prices=prices,
        gen_fixed_cost=gen_fixed,
        gen_variable_cost=gen_var,
        storage_fixed_cost=sto_fixed,
        objective=float(sol.objective),
        iterations=int(sol.iterations),
    )


def recomposition_error(r: EnergyMixReport) -> float:
    """Relative gap between the recomputed discounted cost and the solver objective."""
    return abs(r.discounted_total - r.objective) / max(1.0, abs(r.objective))


# ----------------------------------------------------------------- comparing


@dataclass(frozen=True)
class CaseDiff:
    labels: tuple[str, str]
    capacities: list[tuple[str, float, float]]
    curtailment: dict[str, tuple[float, float]]
    objective: tuple[float, float]

    @property
    def objective_delta(self) -> float:
        return self.objective[1] - self.objective[0]

    def delta(self, row: str) -> float:
        for name, a, b in self.capacities:
            if name == row:
                return b - a
        raise KeyError(row)

    def to_table(self) -> str:
        la, lb = self.labels
        width = max(len(n) for n, _, _ in self.capacities + [("Objective [JPY]", 0, 0)])
        head = f"{'':<{width}}  {la:>16}  {lb:>16}  {'delta':>16}"
        lines = [head, "-" * len(head)]
        for name, a, b in self.capacities:
            lines.append(f"{name:<{width}}  {a:>16,.1f}  {b:>16,.1f}  {b - a:>+16,.1f}")
        lines.append("")
        for kind, (a, b) in self.curtailment.items():
            name = f"{kind.upper()} curtailment [MWh]"
            lines.append(f"{name:<{width}}  {a:>16,.1f}  {b:>16,.1f}  {b - a:>+16,.1f}")
        a, b = self.objective
        lines.append(f"{'Objective [JPY]':<{width}}  {a:>16,.0f}  {b:>16,.0f}  {b - a:>+16,.0f}")
        return "\n".join(lines)


def compare_cases(a: EnergyMixReport | dict, b: EnergyMixReport | dict,
                  labels: tuple[str, str] = ("Case 1", "Case 2"), year: int = -1) -> CaseDiff:
    """Capacity table, total curtailment and objective side by side.

    Accepts reports or ``summary.json`` dictionaries written by
    :func:`write_report`.
    """
    sa, sb = (_summary(r) if isinstance(r, EnergyMixReport) else r for r in (a, b))
    for key in ("generators", "storages", "num_years", "num_timeslots"):
        if sa.get(key) != sb.get(key):
            raise ReportError(f"reports are not comparable: {key} differ ({sa.get(key)} vs {sb.get(key)})")
    cb = dict(sb["capacity_table"])
    rows = [(name, float(va[year]), float(cb[name][year])) for name, va in sa["capacity_table"]]
    curt = {k: (float(sum(sa["curtailment_mwh"][k])), float(sum(sb["curtailment_mwh"][k]))) for k in ("pv", "wp")}
    return CaseDiff(labels, rows, curt, (float(sa["objective"]), float(sb["objective"])))


# ------------------------------------------------------------------- writing


def _summary(r: EnergyMixReport) -> dict[str, Any]:
    per_year = [r.capacity_table(y) for y in range(r.num_years)]
    table = [[name, [rows[k][1] for rows in per_year]] for k, (name, _) in enumerate(per_year[0])]
    return {
        "scenario": r.scenario_name,
        "status": Status.OPTIMAL.value,
        "reserves_enabled": r.reserves_enabled,
        "generators": list(r.generator_names),
        "storages": list(r.storage_names),
        "num_years": r.num_years,
        "num_timeslots": r.num_timeslots,
        "objective": r.objective,
        "discounted_total_recomputed": r.discounted_total,
        "recomposition_rel_error": recomposition_error(r),
        "annual_cost": r.annual_cost.tolist(),
        "capacity_table": table,
        "curtailment_mwh": {"pv": r.pv_curtailment_annual.tolist(), "wp": r.wp_curtailment_annual.tolist()},
        "iterations": r.iterations,
        **r.extra,
    }


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            # "+ 0.0" folds negative zero
            w.writerow([repr(float(v) + 0.0) if isinstance(v, (float, np.floating)) else v for v in row])


def write_report(r: EnergyMixReport, out_dir: str | Path, extra: dict[str, Any] | None = None) -> Path:
    """Write the CSV tables and ``summary.json``; identical inputs give identical bytes."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ny, nt = r.num_years, r.num_timeslots
    yt = [(y, t) for y in range(ny) for t in range(nt)]

    cap_rows = []
    for i, n in enumerate(r.generator_names):
        for y in range(ny):
            cap_rows.append(("generator", n, y, r.gen_capacity[i, y], r.gen_installed[i, y], "MW"))
    for j, n in enumerate(r.storage_names):
        for y in range(ny):
            cap_rows.append(("storage_power", n, y, r.storage_power[j, y], r.storage_power_installed[j, y], "MW"))
            cap_rows.append(("storage_energy", n, y, r.storage_energy[j, y], r.storage_energy_installed[j, y], "MWh"))
    _write_csv(out / "capacities.csv", ["kind", "name", "year", "capacity", "installed", "unit"], cap_rows)

    head = ["year", "timeslot", "load"] + list(r.generator_names)
    head += [f"{n}_charge" for n in r.storage_names] + [f"{n}_discharge" for n in r.storage_names]
    _write_csv(out / "dispatch.csv", head, (
        [y, t, r.load[y, t], *r.dispatch[:, y, t], *r.charge[:, y, t], *r.discharge[:, y, t]] for y, t in yt))

    _write_csv(out / "curtailment.csv", ["year", "timeslot", "pv_curtailment_mw", "wp_curtailment_mw"],
               ([y, t, r.pv_curtailment[y, t], r.wp_curtailment[y, t]] for y, t in yt))

    head = ["year", "timeslot", "required_up", "provided_up", "required_down", "provided_down"]
    cols = []
    for role in ("Ru", "Rd"):
        cols += [(role, i, f"{role}_{n}") for i, n in enumerate(r.generator_names)]
    for role in ("Rscu", "Rscd", "Rsdu", "Rsdd"):
        cols += [(role, j, f"{role}_{n}") for j, n in enumerate(r.storage_names)]
    head += [c[2] for c in cols]
    pu, pd = r.reserve_provided_up, r.reserve_provided_down
    _write_csv(out / "reserves.csv", head, (
        [y, t, r.reserve_required_up[y, t], pu[y, t], r.reserve_required_down[y, t], pd[y, t],
         *(r.reserves[role][e, y, t] for role, e, _ in cols)] for y, t in yt))

    _write_csv(out / "soc.csv", ["year", "timeslot"] + list(r.storage_names),
               ([y, t, *r.soc[:, y, t]] for y in range(ny) for t in range(nt + 1)))

    _write_csv(out / "prices.csv", ["year", "timeslot", "price_jpy_per_mwh"],
               ([y, t, r.prices[y, t]] for y, t in yt))

    ac = r.annual_cost
    _write_csv(out / "costs.csv",
               ["year", "generator_fixed", "generator_variable", "storage_fixed", "annual_cost",
                "discount_weight", "discounted_cost"],
               ([y, r.gen_fixed_cost[:, y].sum(), r.gen_variable_cost[:, y].sum(), r.storage_fixed_cost[:, y].sum(),
                 ac[y], r.discount_weights[y], ac[y] * r.discount_weights[y]] for y in range(ny)))

    summary = _summary(r)
    if extra:
        summary.update(extra)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return out


def load_summary(report_dir: str | Path) -> dict[str, Any]:
    d = Path(report_dir)
    for name in ("summary.json", "capacities.csv"):
        if not (d / name).is_file():
            raise ReportError(f"{d}: missing {name}")
    try:
        return json.loads((d / "summary.json").read_text())
    except json.JSONDecodeError as exc:
        raise ReportError(f"{d}/summary.json: {exc}") from exc
