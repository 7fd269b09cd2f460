"""Model inputs: technology and storage parameters, time series, global settings.

A :class:`Scenario` is immutable once built.  Construction never raises on bad
values; :func:`validate` lists every violated invariant and :func:`load_scenario`
refuses to return a scenario whose report is non-empty.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

LOGGER = logging.getLogger(__name__)

HOURS_PER_YEAR = 8760


class ScenarioError(ValueError):
    """Raised when scenario input cannot be turned into a valid Scenario."""


@dataclass(frozen=True)
class Violation:
    code: str
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message} [{self.code}]"


@dataclass(frozen=True)
class GlobalParams:
    """Horizon and economy-wide settings.

    ``fixed_cost_weight`` multiplies every annual fixed charge.  It stays 1.0
    for full-year runs and becomes ``hours / 8760`` when a scenario is cut down
    to a representative window, so capital charges match the simulated period.
    """

    discount_rate: float
    reserve_margin: float
    num_years: int
    timeslots_per_year: int
    timeslot_hours: float = 1.0
    fixed_cost_weight: float = 1.0


@dataclass(frozen=True)
class GeneratorTech:
    """One generation technology.

    Per-year quantities are tuples of length ``num_years``.  ``cf_min``,
    ``cf_max``, ``ramp_up`` and ``ramp_down`` may be ``None``, meaning the
    corresponding constraint is not emitted at all.
    """

    name: str
    profile_driven: bool
    annual_expense_rate: float
    fixed_cost: tuple[float, ...]
    variable_cost: tuple[float, ...]
    cap_upper: float
    existing_capacity: tuple[float, ...]
    cf_min: float | None = None
    cf_max: float | None = None
    ramp_up: float | None = None
    ramp_down: float | None = None
    reserve_up_rate: float = 0.0
    reserve_down_rate: float = 0.0

    def __post_init__(self) -> None:
        for name in ("fixed_cost", "variable_cost", "existing_capacity"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if self.profile_driven:
            # curtailable renewables never carry regulation reserve
            object.__setattr__(self, "reserve_up_rate", 0.0)
            object.__setattr__(self, "reserve_down_rate", 0.0)


@dataclass(frozen=True)
class StorageTech:
    """One (aggregated) energy storage technology.

    ``leg_efficiency`` applies once on charge and once on discharge, so the
    round-trip efficiency is its square.
    """

    name: str
    power_expense_rate: float
    energy_expense_rate: float
    power_fixed_cost: tuple[float, ...]
    energy_fixed_cost: tuple[float, ...]
    leg_efficiency: float
    power_cap_upper: float
    energy_cap_upper: float
    existing_power: tuple[float, ...]
    existing_energy: tuple[float, ...]
    reserve_up_rate: float = 0.0
    reserve_down_rate: float = 0.0
    soc_min: float = 0.2
    soc_boundary: float = 0.5

    def __post_init__(self) -> None:
        for name in ("power_fixed_cost", "energy_fixed_cost", "existing_power", "existing_energy"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))


@dataclass(frozen=True, eq=False)
class TimeSeriesInputs:
    """Load (MW, shape ``(num_years, timeslots)``) and per-unit VRE profiles."""

    load: np.ndarray
    pv_profile: np.ndarray
    wp_profile: np.ndarray

    def __post_init__(self) -> None:
        for name in ("load", "pv_profile", "wp_profile"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.load.ndim == 1:
            load = self.load.reshape(1, -1)
            load.setflags(write=False)
            object.__setattr__(self, "load", load)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TimeSeriesInputs):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, n), getattr(other, n))
            for n in ("load", "pv_profile", "wp_profile")
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class ReserveParams:
    """Regulation-reserve requirement rates.

    ``load_rate_down`` defaults to ``load_rate``; it exists for studies that
    want asymmetric load fluctuation.
    """

    enabled: bool = True
    load_rate: float = 0.03
    pv_up: float = 0.10
    pv_down: float = 0.10
    wp_up: float = 0.08
    wp_down: float = 0.08
    load_rate_down: float | None = None

    @property
    def load_rate_up(self) -> float:
        return self.load_rate

    @property
    def effective_load_rate_down(self) -> float:
        return self.load_rate if self.load_rate_down is None else self.load_rate_down


@dataclass(frozen=True)
class Scenario:
    globals: GlobalParams
    generators: tuple[GeneratorTech, ...]
    storages: tuple[StorageTech, ...]
    series: TimeSeriesInputs
    reserves: ReserveParams = field(default_factory=ReserveParams)
    pv_index: int | None = None
    wp_index: int | None = None
    name: str = "scenario"

    def __post_init__(self) -> None:
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "storages", tuple(self.storages))

    @property
    def num_years(self) -> int:
        return self.globals.num_years

    @property
    def num_timeslots(self) -> int:
        return self.globals.timeslots_per_year

    def generator(self, name: str) -> GeneratorTech:
        for g in self.generators:
            if g.name == name:
                return g
        raise KeyError(name)

    def generator_index(self, name: str) -> int:
        for i, g in enumerate(self.generators):
            if g.name == name:
                return i
        raise KeyError(name)

    def storage_index(self, name: str) -> int:
        for j, st in enumerate(self.storages):
            if st.name == name:
                return j
        raise KeyError(name)

    def with_reserves(self, enabled: bool) -> "Scenario":
        return replace(self, reserves=replace(self.reserves, enabled=enabled))


# Where each model constant lives on a Scenario.  ``gen`` / ``sto`` entries are
# per-technology attributes.
PARAMETER_SYMBOLS: dict[str, str] = {
    "r": "globals.discount_rate",
    "delta": "globals.reserve_margin",
    "yNum": "globals.num_years",
    "tNum": "globals.timeslots_per_year",
    "g": "gen.annual_expense_rate",
    "f": "gen.fixed_cost",
    "v": "gen.variable_cost",
    "pgcap_upper": "gen.cap_upper",
    "epc": "gen.existing_capacity",
    "cf_min": "gen.cf_min",
    "cf_max": "gen.cf_max",
    "d_up": "gen.ramp_up",
    "d_down": "gen.ramp_down",
    "r_up_upper": "gen.reserve_up_rate",
    "r_down_upper": "gen.reserve_down_rate",
    "gsp": "sto.power_expense_rate",
    "gse": "sto.energy_expense_rate",
    "fsp": "sto.power_fixed_cost",
    "fse": "sto.energy_fixed_cost",
    "mu_s": "sto.leg_efficiency",
    "pscap_upper": "sto.power_cap_upper",
    "escap_upper": "sto.energy_cap_upper",
    "epsc": "sto.existing_power",
    "eesc": "sto.existing_energy",
    "rs_up_upper": "sto.reserve_up_rate",
    "rs_down_upper": "sto.reserve_down_rate",
    "load": "series.load",
    "pvg": "series.pv_profile",
    "wpg": "series.wp_profile",
    "rcl": "reserves.load_rate",
    "rcp_up": "reserves.pv_up",
    "rcp_down": "reserves.pv_down",
    "rcw_up": "reserves.wp_up",
    "rcw_down": "reserves.wp_down",
}


# ---------------------------------------------------------------- validation


def _finite(x: float) -> bool:
    return x is not None and not math.isnan(x)


def validate(s: Scenario) -> list[Violation]:
    """Return every violated invariant; an empty list means the scenario is valid."""
    out: list[Violation] = []

    def bad(code: str, path: str, message: str) -> None:
        out.append(Violation(code, path, message))

    gp = s.globals
    if not (0.0 <= gp.discount_rate < 1.0):
        bad("discount_rate_range", "globals.discount_rate", "discount rate must lie in [0, 1)")
    if not gp.reserve_margin >= 0.0:
        bad("reserve_margin_negative", "globals.reserve_margin", "reserve margin must be >= 0")
    if gp.num_years < 1:
        bad("num_years<1", "globals.num_years", "at least one year is required")
    if gp.timeslots_per_year < 2:
        bad("timeslots<2", "globals.timeslots_per_year", "at least two timeslots are required")
    if not gp.timeslot_hours > 0.0:
        bad("timeslot_hours_nonpositive", "globals.timeslot_hours", "timeslot length must be positive")
    if not gp.fixed_cost_weight > 0.0:
        bad("fixed_cost_weight_nonpositive", "globals.fixed_cost_weight", "fixed cost weight must be positive")
    ny, nt = gp.num_years, gp.timeslots_per_year

    def per_year(path: str, seq: Sequence[float], nonneg: bool = True) -> None:
        if len(seq) != ny:
            bad("length_mismatch", path, f"length mismatch: expected {ny} yearly values, got {len(seq)}")
        if any(not _finite(v) for v in seq):
            bad("not_finite", path, "values must be finite")
        elif nonneg and any(v < 0 for v in seq):
            bad("negative", path, "values must be >= 0")

    def rate(path: str, value: float | None, code: str) -> None:
        if value is not None and not (0.0 <= value <= 1.0):
            bad(code, path, "rate must lie in [0, 1]")

    names = [g.name for g in s.generators]
    if len(set(names)) != len(names):
        bad("duplicate_name", "generators", "generator names must be unique")
    for i, g in enumerate(s.generators):
        p = f"generators[{i}]"
        if g.annual_expense_rate < 0:
            bad("negative", f"{p}.annual_expense_rate", "expense rate must be >= 0")
        per_year(f"{p}.fixed_cost", g.fixed_cost)
        per_year(f"{p}.variable_cost", g.variable_cost)
        per_year(f"{p}.existing_capacity", g.existing_capacity)
        if not g.cap_upper >= 0:
            bad("negative", f"{p}.cap_upper", "capacity upper limit must be >= 0")
        elif any(e > g.cap_upper for e in g.existing_capacity):
            bad("existing>upper", f"{p}.existing_capacity", "existing capacity exceeds capacity upper limit")
        rate(f"{p}.cf_min", g.cf_min, "cf_range")
        rate(f"{p}.cf_max", g.cf_max, "cf_range")
        if g.cf_min is not None and g.cf_max is not None and g.cf_min > g.cf_max:
            bad("cf_min>cf_max", f"{p}.cf_min", "cf_min>cf_max")
        rate(f"{p}.ramp_up", g.ramp_up, "ramp_range")
        rate(f"{p}.ramp_down", g.ramp_down, "ramp_range")
        rate(f"{p}.reserve_up_rate", g.reserve_up_rate, "reserve_rate_range")
        rate(f"{p}.reserve_down_rate", g.reserve_down_rate, "reserve_rate_range")

    for role, idx in (("pv_index", s.pv_index), ("wp_index", s.wp_index)):
        if idx is None:
            continue
        if not 0 <= idx < len(s.generators):
            bad("index_range", role, f"{role} does not reference a generator")
        elif not s.generators[idx].profile_driven:
            bad("not_profile_driven", role, f"{role} must reference a profile-driven technology")
    if s.pv_index is not None and s.pv_index == s.wp_index:
        bad("index_clash", "wp_index", "pv_index and wp_index must differ")
    roles = {s.pv_index, s.wp_index}
    for i, g in enumerate(s.generators):
        if g.profile_driven and i not in roles:
            bad("orphan_profile_tech", f"generators[{i}]", "profile-driven technology is neither pv nor wp")

    for j, st in enumerate(s.storages):
        p = f"storages[{j}]"
        for name in ("power_expense_rate", "energy_expense_rate"):
            if getattr(st, name) < 0:
                bad("negative", f"{p}.{name}", "expense rate must be >= 0")
        per_year(f"{p}.power_fixed_cost", st.power_fixed_cost)
        per_year(f"{p}.energy_fixed_cost", st.energy_fixed_cost)
        per_year(f"{p}.existing_power", st.existing_power)
        per_year(f"{p}.existing_energy", st.existing_energy)
        if not st.leg_efficiency > 0:
            bad("efficiency<=0", f"{p}.leg_efficiency", "efficiency must be positive")
        elif st.leg_efficiency > 1:
            bad("efficiency>1", f"{p}.leg_efficiency", "efficiency must not exceed 1")
        if not (0.0 <= st.soc_min < st.soc_boundary <= 1.0):
            bad("soc_order", f"{p}.soc_min", "require 0 <= soc_min < soc_boundary <= 1")
        if any(e > st.power_cap_upper for e in st.existing_power):
            bad("existing>upper", f"{p}.existing_power", "existing power exceeds upper limit")
        if any(e > st.energy_cap_upper for e in st.existing_energy):
            bad("existing>upper", f"{p}.existing_energy", "existing energy exceeds upper limit")
        rate(f"{p}.reserve_up_rate", st.reserve_up_rate, "reserve_rate_range")
        rate(f"{p}.reserve_down_rate", st.reserve_down_rate, "reserve_rate_range")

    ts = s.series
    if ts.load.shape != (ny, nt):
        bad("length_mismatch", "series.load", f"length mismatch: load has shape {ts.load.shape}, expected ({ny}, {nt})")
    elif not np.all(np.isfinite(ts.load)) or np.any(ts.load < 0):
        bad("load_negative", "series.load", "load must be finite and >= 0")
    for name in ("pv_profile", "wp_profile"):
        arr = getattr(ts, name)
        if arr.shape != (nt,):
            bad("length_mismatch", f"series.{name}", f"length mismatch: {len(arr)} values, expected {nt}")
        elif not np.all(np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > 1):
            bad("per_unit_range", f"series.{name}", "per-unit out of [0,1]")

    rp = s.reserves
    for name in ("load_rate", "pv_up", "pv_down", "wp_up", "wp_down", "load_rate_down"):
        rate(f"reserves.{name}", getattr(rp, name), "reserve_rate_range")
    return out


def check(s: Scenario) -> Scenario:
    """Return ``s`` unchanged or raise :class:`ScenarioError` listing violations."""
    problems = validate(s)
    if problems:
        raise ScenarioError("invalid scenario:\n  " + "\n  ".join(str(v) for v in problems))
    return s


# ------------------------------------------------------------------- loading


def _per_year_value(raw: Any, ny: int, path: str) -> tuple[float, ...]:
    if isinstance(raw, (int, float)):
        return (float(raw),) * ny
    if isinstance(raw, list):
        try:
            return tuple(float(v) for v in raw)
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"{path}: malformed numeric sequence") from exc
    raise ScenarioError(f"{path}: expected a number or a list of numbers")


def _number(raw: Any, path: str, *, optional: bool = False) -> float | None:
    if raw is None:
        if optional:
            return None
        raise ScenarioError(f"{path}: required value is missing")
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ScenarioError(f"{path}: expected a number, got {raw!r}")
    return float(raw)


def _upper(raw: Any, path: str) -> float:
    # null / "inf" means no limit
    if raw is None or raw == "inf":
        return math.inf
    return _number(raw, path)  # type: ignore[return-value]


def _read_series(ref: Any, base: Path, path: str) -> np.ndarray:
    """Read one column of a headed CSV.  ``ref`` is a path or ``{"file", "column"}``."""
    if isinstance(ref, str):
        file, column = ref, None
    elif isinstance(ref, dict) and "file" in ref:
        file, column = ref["file"], ref.get("column")
    else:
        raise ScenarioError(f"{path}: expected a CSV path or an object with 'file'")
    fpath = (base / file) if not Path(file).is_absolute() else Path(file)
    if not fpath.is_file():
        raise ScenarioError(f"{path}: missing file {fpath}")
    with fpath.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ScenarioError(f"{path}: {fpath} is empty (header row required)") from None
        header = [h.strip() for h in header]
        if column is None:
            col = 0
        elif column in header:
            col = header.index(column)
        else:
            raise ScenarioError(f"{path}: column {column!r} not in {fpath.name} header {header}")
        values = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                values.append(float(row[col]))
            except (IndexError, ValueError) as exc:
                raise ScenarioError(f"{path}: malformed value at {fpath.name}:{lineno}") from exc
    return np.asarray(values, dtype=float)


_GEN_KEYS = {f.name for f in fields(GeneratorTech)}
_STO_KEYS = {f.name for f in fields(StorageTech)}


def _reject_unknown(obj: dict, allowed: set[str], path: str) -> None:
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ScenarioError(f"{path}: unknown field(s) {extra}")


def scenario_from_dict(doc: dict, base: Path | str = ".") -> Scenario:
    """Build a Scenario from a parsed config document (CSV paths relative to ``base``)."""
    base = Path(base)
    if not isinstance(doc, dict):
        raise ScenarioError("config root must be a JSON object")
    for key in ("globals", "generators", "series"):
        if key not in doc:
            raise ScenarioError(f"{key}: required section is missing")
    _reject_unknown(doc, {"name", "globals", "generators", "storages", "series", "reserves",
                          "pv_index", "wp_index", "description"}, "<root>")

    g = doc["globals"]
    _reject_unknown(g, {f.name for f in fields(GlobalParams)}, "globals")
    try:
        ny = int(g["num_years"])
        nt = int(g["timeslots_per_year"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError("globals: num_years and timeslots_per_year must be integers") from exc
    gp = GlobalParams(
        discount_rate=_number(g.get("discount_rate"), "globals.discount_rate"),
        reserve_margin=_number(g.get("reserve_margin", 0.08), "globals.reserve_margin"),
        num_years=ny,
        timeslots_per_year=nt,
        timeslot_hours=_number(g.get("timeslot_hours", 1.0), "globals.timeslot_hours"),
        fixed_cost_weight=_number(g.get("fixed_cost_weight", 1.0), "globals.fixed_cost_weight"),
    )

    gens = []
    for i, raw in enumerate(doc["generators"]):
        p = f"generators[{i}]"
        if not isinstance(raw, dict):
            raise ScenarioError(f"{p}: expected an object")
        _reject_unknown(raw, _GEN_KEYS, p)
        if "name" not in raw:
            raise ScenarioError(f"{p}.name: required value is missing")
        gens.append(GeneratorTech(
            name=str(raw["name"]),
            profile_driven=bool(raw.get("profile_driven", False)),
            annual_expense_rate=_number(raw.get("annual_expense_rate"), f"{p}.annual_expense_rate"),
            fixed_cost=_per_year_value(raw.get("fixed_cost"), ny, f"{p}.fixed_cost"),
            variable_cost=_per_year_value(raw.get("variable_cost", 0.0), ny, f"{p}.variable_cost"),
            cap_upper=_upper(raw.get("cap_upper"), f"{p}.cap_upper"),
            existing_capacity=_per_year_value(raw.get("existing_capacity", 0.0), ny, f"{p}.existing_capacity"),
            cf_min=_number(raw.get("cf_min"), f"{p}.cf_min", optional=True),
            cf_max=_number(raw.get("cf_max"), f"{p}.cf_max", optional=True),
            ramp_up=_number(raw.get("ramp_up"), f"{p}.ramp_up", optional=True),
            ramp_down=_number(raw.get("ramp_down"), f"{p}.ramp_down", optional=True),
            reserve_up_rate=_number(raw.get("reserve_up_rate", 0.0), f"{p}.reserve_up_rate"),
            reserve_down_rate=_number(raw.get("reserve_down_rate", 0.0), f"{p}.reserve_down_rate"),
        ))

    stos = []
    for j, raw in enumerate(doc.get("storages", [])):
        p = f"storages[{j}]"
        if not isinstance(raw, dict):
            raise ScenarioError(f"{p}: expected an object")
        _reject_unknown(raw, _STO_KEYS, p)
        if "name" not in raw:
            raise ScenarioError(f"{p}.name: required value is missing")
        stos.append(StorageTech(
            name=str(raw["name"]),
            power_expense_rate=_number(raw.get("power_expense_rate"), f"{p}.power_expense_rate"),
            energy_expense_rate=_number(raw.get("energy_expense_rate"), f"{p}.energy_expense_rate"),
            power_fixed_cost=_per_year_value(raw.get("power_fixed_cost"), ny, f"{p}.power_fixed_cost"),
            energy_fixed_cost=_per_year_value(raw.get("energy_fixed_cost"), ny, f"{p}.energy_fixed_cost"),
            leg_efficiency=_number(raw.get("leg_efficiency"), f"{p}.leg_efficiency"),
            power_cap_upper=_upper(raw.get("power_cap_upper"), f"{p}.power_cap_upper"),
            energy_cap_upper=_upper(raw.get("energy_cap_upper"), f"{p}.energy_cap_upper"),
            existing_power=_per_year_value(raw.get("existing_power", 0.0), ny, f"{p}.existing_power"),
            existing_energy=_per_year_value(raw.get("existing_energy", 0.0), ny, f"{p}.existing_energy"),
            reserve_up_rate=_number(raw.get("reserve_up_rate", 0.0), f"{p}.reserve_up_rate"),
            reserve_down_rate=_number(raw.get("reserve_down_rate", 0.0), f"{p}.reserve_down_rate"),
            soc_min=_number(raw.get("soc_min", 0.2), f"{p}.soc_min"),
            soc_boundary=_number(raw.get("soc_boundary", 0.5), f"{p}.soc_boundary"),
        ))

    sd = doc["series"]
    _reject_unknown(sd, {"load", "pv_profile", "wp_profile"}, "series")
    if "load" not in sd:
        raise ScenarioError("series.load: required value is missing")
    load = _read_series(sd["load"], base, "series.load")
    if load.size != ny * nt:
        raise ScenarioError(
            f"series.load: length mismatch: {load.size} rows, expected num_years*timeslots = {ny * nt}")
    profiles = {}
    for name in ("pv_profile", "wp_profile"):
        if name in sd:
            arr = _read_series(sd[name], base, f"series.{name}")
            if arr.size != nt:
                raise ScenarioError(f"series.{name}: length mismatch: {arr.size} rows, expected {nt}")
            if np.any(arr < 0) or np.any(arr > 1):
                raise ScenarioError(f"series.{name}: per-unit out of [0,1]")
        else:
            arr = np.zeros(nt)
        profiles[name] = arr
    series = TimeSeriesInputs(load=load.reshape(ny, nt), **profiles)

    rd = doc.get("reserves", {})
    _reject_unknown(rd, {f.name for f in fields(ReserveParams)}, "reserves")
    defaults = ReserveParams()
    reserves = ReserveParams(
        enabled=bool(rd.get("enabled", defaults.enabled)),
        **{k: _number(rd.get(k, getattr(defaults, k)), f"reserves.{k}")
           for k in ("load_rate", "pv_up", "pv_down", "wp_up", "wp_down")},
        load_rate_down=_number(rd.get("load_rate_down"), "reserves.load_rate_down", optional=True),
    )

    def role(key: str) -> int | None:
        raw = doc.get(key)
        if raw is None:
            return None
        if isinstance(raw, str):
            names = [x.name for x in gens]
            if raw not in names:
                raise ScenarioError(f"{key}: unknown generator {raw!r}")
            return names.index(raw)
        return int(raw)

    return Scenario(
        globals=gp,
        generators=tuple(gens),
        storages=tuple(stos),
        series=series,
        reserves=reserves,
        pv_index=role("pv_index"),
        wp_index=role("wp_index"),
        name=str(doc.get("name", "scenario")),
    )


def load_scenario(config_path: str | Path) -> Scenario:
    """Read a JSON scenario config (plus referenced CSVs) and validate it."""
    config_path = Path(config_path)
    if not config_path.is_file():
        raise ScenarioError(f"missing file {config_path}")
    try:
        doc = json.loads(config_path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{config_path}: malformed JSON ({exc})") from exc
    s = scenario_from_dict(doc, config_path.parent)
    LOGGER.debug("loaded scenario %s from %s", s.name, config_path)
    return check(s)


def _jsonable(x: float) -> float | None:
    return None if math.isinf(x) else x


def save_scenario(s: Scenario, out_dir: str | Path, stem: str = "scenario") -> Path:
    """Write ``s`` as ``<stem>.json`` plus load/profile CSVs; returns the JSON path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    load_file = f"{stem}_load.csv"
    prof_file = f"{stem}_profiles.csv"
    ny, nt = s.num_years, s.num_timeslots
    with (out_dir / load_file).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["load_mw"])
        for v in s.series.load.reshape(-1):
            w.writerow([repr(float(v))])
    with (out_dir / prof_file).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pv_pu", "wp_pu"])
        for a, b in zip(s.series.pv_profile, s.series.wp_profile):
            w.writerow([repr(float(a)), repr(float(b))])

    def gen_doc(g: GeneratorTech) -> dict:
        d = {f.name: getattr(g, f.name) for f in fields(GeneratorTech)}
        for k in ("fixed_cost", "variable_cost", "existing_capacity"):
            d[k] = list(d[k])
        d["cap_upper"] = _jsonable(g.cap_upper)
        return d

    def sto_doc(st: StorageTech) -> dict:
        d = {f.name: getattr(st, f.name) for f in fields(StorageTech)}
        for k in ("power_fixed_cost", "energy_fixed_cost", "existing_power", "existing_energy"):
            d[k] = list(d[k])
        d["power_cap_upper"] = _jsonable(st.power_cap_upper)
        d["energy_cap_upper"] = _jsonable(st.energy_cap_upper)
        return d

    doc = {
        "name": s.name,
        "globals": {f.name: getattr(s.globals, f.name) for f in fields(GlobalParams)},
        "generators": [gen_doc(g) for g in s.generators],
        "storages": [sto_doc(st) for st in s.storages],
        "pv_index": s.pv_index,
        "wp_index": s.wp_index,
        "series": {
            "load": {"file": load_file, "column": "load_mw"},
            "pv_profile": {"file": prof_file, "column": "pv_pu"},
            "wp_profile": {"file": prof_file, "column": "wp_pu"},
        },
        "reserves": {f.name: getattr(s.reserves, f.name) for f in fields(ReserveParams)},
    }
    path = out_dir / f"{stem}.json"
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return path


# ------------------------------------------------------------ horizon tools


def truncate_horizon(s: Scenario, timeslots: int | None = None, years: int | None = None) -> Scenario:
    """Keep the first ``years`` years and ``timeslots`` slots of each year.

    Capacity-factor rows are written against the retained slot count, so the
    bounds keep their meaning as fractions of the shorter window.  Fixed
    charges are scaled by the retained share of the year.
    """
    ny = s.num_years if years is None else years
    nt = s.num_timeslots if timeslots is None else timeslots
    if not 1 <= ny <= s.num_years:
        raise ScenarioError(f"years override {ny} outside 1..{s.num_years}")
    if not 2 <= nt <= s.num_timeslots:
        raise ScenarioError(f"timeslot override {nt} outside 2..{s.num_timeslots}")
    if ny == s.num_years and nt == s.num_timeslots:
        return s
    gp = replace(
        s.globals,
        num_years=ny,
        timeslots_per_year=nt,
        fixed_cost_weight=s.globals.fixed_cost_weight * nt / s.num_timeslots,
    )
    gens = tuple(
        replace(g, fixed_cost=g.fixed_cost[:ny], variable_cost=g.variable_cost[:ny],
                existing_capacity=g.existing_capacity[:ny])
        for g in s.generators
    )
    stos = tuple(
        replace(st, power_fixed_cost=st.power_fixed_cost[:ny], energy_fixed_cost=st.energy_fixed_cost[:ny],
                existing_power=st.existing_power[:ny], existing_energy=st.existing_energy[:ny])
        for st in s.storages
    )
    series = TimeSeriesInputs(
        load=s.series.load[:ny, :nt],
        pv_profile=s.series.pv_profile[:nt],
        wp_profile=s.series.wp_profile[:nt],
    )
    return replace(s, globals=gp, generators=gens, storages=stos, series=series)


# --------------------------------------------------------- bundled scenarios

# Capital recovery factor for a 30-year life at 3 %: the annual expense rate
# used for every technology in the bundled scenarios.
def capital_recovery_factor(rate: float, life_years: int) -> float:
    if rate == 0:
        return 1.0 / life_years
    growth = (1.0 + rate) ** life_years
    return rate * growth / (growth - 1.0)


DEFAULT_EXPENSE_RATE = capital_recovery_factor(0.03, 30)

_MW_PER_10K_JPY_PER_KW = 1.0e7  # 10^4 JPY/kW -> JPY/MW


def synthetic_year(seed: int = 2019) -> TimeSeriesInputs:
    """Hourly load (MW) and PV/WP per-unit profiles for one synthetic year.

    The year starts on 1 April (start of the Japanese fiscal year), so short
    windows taken from the front are spring weeks with strong solar output.
    Shapes: load has winter and summer peaks, a weekday/weekend cycle and a
    double-hump daily curve (peak ~155 GW, mean ~100 GW); PV follows a solar
    elevation curve scaled by a daily clearness draw; wind is a smoothed
    random process with a winter-heavy mean (~0.27 pu).
    """
    rng = np.random.default_rng(seed)
    hours = np.arange(HOURS_PER_YEAR)
    day = hours // 24
    hod = hours % 24
    doy = (day + 90) % 365  # calendar day of year, 0 = 1 January

    seasonal = 1.0 + 0.10 * np.cos(2 * np.pi * (doy - 15) / 365) ** 2 \
        + 0.12 * np.exp(-((doy - 215) / 25.0) ** 2)
    daily = 0.80 + 0.12 * np.exp(-((hod - 11) / 3.0) ** 2) + 0.14 * np.exp(-((hod - 18) / 3.5) ** 2) \
        - 0.06 * np.exp(-((hod - 4) / 2.5) ** 2)
    weekday = np.where(day % 7 >= 5, 0.90, 1.0)
    noise = 1.0 + 0.01 * rng.standard_normal(HOURS_PER_YEAR)
    load = 108_000.0 * seasonal * daily * weekday * noise

    decl = 23.44 * np.sin(2 * np.pi * (doy - 80) / 365)
    lat = np.deg2rad(36.0)
    hour_angle = np.deg2rad(15.0 * (hod + 0.5 - 12.0))
    sin_elev = np.sin(lat) * np.sin(np.deg2rad(decl)) + np.cos(lat) * np.cos(np.deg2rad(decl)) * np.cos(hour_angle)
    clear_day = rng.uniform(0.35, 1.0, size=365)
    pv = 0.85 * np.clip(sin_elev, 0.0, None) * clear_day[day % 365]

    wind_mean = 0.27 + 0.08 * np.cos(2 * np.pi * (doy - 15) / 365)
    z = np.zeros(HOURS_PER_YEAR)
    eps = rng.standard_normal(HOURS_PER_YEAR)
    for h in range(1, HOURS_PER_YEAR):
        z[h] = 0.97 * z[h - 1] + 0.243 * eps[h]
    wp = wind_mean * np.exp(0.55 * z - 0.15)

    return TimeSeriesInputs(
        load=np.round(load, 1).reshape(1, -1),
        pv_profile=np.round(np.clip(pv, 0.0, 1.0), 4),
        wp_profile=np.round(np.clip(wp, 0.0, 1.0), 4),
    )


# name, fixed cost [10^4 JPY/kW], existing [MW], cf_min, cf_max, ramp, variable cost [JPY/MWh],
# capacity upper [MW], reserve rate (up = down)
_CASE_STUDY_GENERATORS = (
    ("nuclear", 40.0, 39_561.0, 1.00, 1.00, 0.0, 1_800.0, 39_561.0, 0.0),
    ("coal", 24.4, 27_708.0, 0.30, 0.85, 0.2, 4_300.0, 27_708.0, 0.05),
    ("lng", 16.1, 67_251.0, 0.30, 0.90, 0.2, 8_700.0, 67_251.0, 0.10),
    ("oil", 20.0, 27_858.0, 0.30, 0.90, 0.2, 17_500.0, 27_858.0, 0.10),
    ("hydro", 64.0, 36_065.0, 0.113, 0.55, 1.0, 0.0, 36_065.0, 0.20),
    ("geothermal", 79.0, 0.134, 0.0, 0.70, None, 0.0, 10_375.0, 0.0),
    ("pv", 29.4, 53_269.0, None, None, None, 0.0, 300_000.0, 0.0),
    ("wp", 34.7, 4_043.0, None, None, None, 0.0, 285_000.0, 0.0),
)


def builtin_case_study(hours: int = HOURS_PER_YEAR, reserves: bool = True) -> Scenario:
    """Japanese single-year case study with synthetic profiles.

    Parameter provenance:

    * fixed costs, existing capacities, capacity-factor bounds and ramp limits:
      the published case-study table (``"-"`` entries become ``None``);
    * fluctuation rates 3 % (load), 10 % (PV), 8 % (WP);
    * assumptions, not published values: annual expense rate (capital
      recovery, 30 years at 3 %), fuel-based variable costs, capacity upper
      limits (thermal/nuclear/hydro frozen at existing, geothermal at
      10,375 MW), reserve rates, storage costs and efficiencies, existing
      pumped hydro 26 GW / 130 GWh and batteries 1.6 GW / 9.6 GWh,
      reserve margin 0.08, discount rate 0.

    ``hours < 8760`` keeps the first ``hours`` slots (a spring window) and
    pro-rates fixed charges to that window.
    """
    crf = DEFAULT_EXPENSE_RATE
    gens = []
    for name, fc, epc, cfmin, cfmax, ramp, vc, upper, rrate in _CASE_STUDY_GENERATORS:
        gens.append(GeneratorTech(
            name=name,
            profile_driven=name in ("pv", "wp"),
            annual_expense_rate=crf,
            fixed_cost=(fc * _MW_PER_10K_JPY_PER_KW,),
            variable_cost=(vc,),
            cap_upper=upper,
            existing_capacity=(epc,),
            cf_min=cfmin,
            cf_max=cfmax,
            ramp_up=ramp,
            ramp_down=ramp,
            reserve_up_rate=rrate,
            reserve_down_rate=rrate,
        ))
    storages = (
        StorageTech(
            name="pumped_hydro", power_expense_rate=crf, energy_expense_rate=crf,
            power_fixed_cost=(1.0e8,), energy_fixed_cost=(2.0e6,), leg_efficiency=0.84,
            power_cap_upper=26_000.0, energy_cap_upper=400_000.0,
            existing_power=(26_000.0,), existing_energy=(130_000.0,),
            reserve_up_rate=0.5, reserve_down_rate=0.5,
        ),
        StorageTech(
            name="bess", power_expense_rate=crf, energy_expense_rate=crf,
            power_fixed_cost=(3.0e7,), energy_fixed_cost=(4.0e7,), leg_efficiency=0.95,
            power_cap_upper=50_000.0, energy_cap_upper=300_000.0,
            existing_power=(1_600.0,), existing_energy=(9_600.0,),
            reserve_up_rate=1.0, reserve_down_rate=1.0,
        ),
    )
    s = Scenario(
        globals=GlobalParams(discount_rate=0.0, reserve_margin=0.08, num_years=1,
                             timeslots_per_year=HOURS_PER_YEAR),
        generators=tuple(gens),
        storages=storages,
        series=synthetic_year(),
        reserves=ReserveParams(enabled=reserves, load_rate=0.03, pv_up=0.10, pv_down=0.10,
                               wp_up=0.08, wp_down=0.08),
        pv_index=6,
        wp_index=7,
        name="japan_case_study",
    )
    return truncate_horizon(s, timeslots=hours)


def stress_scenario(reserves: bool = True) -> Scenario:
    """One-day, four-generator system where regulation reserves bind.

    PV capacity (1,400 MW) is large relative to a ~1 GW load, so at midday
    thermal units are pushed down and cannot carry the 10 % PV fluctuation
    reserve. With reserves enabled the optimum curtails PV rather than wind,
    since each curtailed PV MW relieves more of the requirement. Capacities
    are frozen at their existing values; only pumped-hydro energy can grow.
    """
    t = np.arange(24)
    load = 900 + 150 * np.exp(-((t - 11) / 3.0) ** 2) + 300 * np.exp(-((t - 18.5) / 2.0) ** 2)
    pv = 0.85 * np.clip(np.sin(np.pi * (t + 0.5 - 6) / 12), 0.0, None)
    wp = np.clip(0.55 + 0.35 * np.cos(2 * np.pi * (t - 2) / 24), 0.0, 1.0)

    def gen(name, fixed, var, cap, cf_min=None, cf_max=None, ramp=None, rate=0.0):
        return GeneratorTech(
            name=name, profile_driven=name in ("pv", "wp"), annual_expense_rate=0.1,
            fixed_cost=(fixed,), variable_cost=(var,), cap_upper=cap, existing_capacity=(cap,),
            cf_min=cf_min, cf_max=cf_max, ramp_up=ramp, ramp_down=ramp,
            reserve_up_rate=rate, reserve_down_rate=rate,
        )

    gens = (
        gen("coal", 2.0e5, 4_000.0, 400.0, 0.3, 0.85, 0.2, 0.05),
        gen("lng", 1.5e5, 9_000.0, 900.0, None, 0.9, 0.5, 0.15),
        gen("pv", 3.0e5, 0.0, 1_400.0),
        gen("wp", 3.5e5, 0.0, 500.0),
    )
    pumped = StorageTech(
        name="pumped_hydro", power_expense_rate=0.1, energy_expense_rate=0.1,
        power_fixed_cost=(1.0e5,), energy_fixed_cost=(2.0e3,), leg_efficiency=0.9,
        power_cap_upper=300.0, energy_cap_upper=5_000.0,
        existing_power=(300.0,), existing_energy=(600.0,),
        reserve_up_rate=0.5, reserve_down_rate=0.5,
    )
    return Scenario(
        globals=GlobalParams(discount_rate=0.0, reserve_margin=0.08, num_years=1,
                             timeslots_per_year=24, fixed_cost_weight=1.0 / 365),
        generators=gens,
        storages=(pumped,),
        series=TimeSeriesInputs(load=np.round(load, 3).reshape(1, -1),
                                pv_profile=np.round(pv, 4), wp_profile=np.round(wp, 4)),
        reserves=ReserveParams(enabled=reserves),
        pv_index=2,
        wp_index=3,
        name="reserve_stress_day",
    )
