"""Assemble the energy-mix linear program from a Scenario.

Columns and rows are laid out in contiguous blocks: one block per variable
role (ordered role, then technology, year, timeslot) and one block per row
family.  Symbolic keys are recovered from block offsets instead of being
stored per column, which keeps full-year (8760 slot) builds cheap.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from gridmix.scenario import Scenario, ScenarioError, validate

LOGGER = logging.getLogger(__name__)

DEFAULT_MAX_COLUMNS = 20_000_000

GEN_TIME_ROLES = ("Pg", "Ru", "Rd")
CURTAIL_ROLES = ("Pcpv", "Pcwp")
STORAGE_TIME_ROLES = ("Psin", "Psout", "Rscu", "Rscd", "Rsdu", "Rsdd")
ROLES = GEN_TIME_ROLES + CURTAIL_ROLES + STORAGE_TIME_ROLES + (
    "Es", "Pgcap", "Pginst", "Pscap", "Psinst", "Escap", "Esinst")

ROW_FAMILIES = (
    "Balance", "ReserveUp", "ReserveDown",
    "GenCap", "GenDown", "PvDef", "WpDef",
    "GenResUpCap", "GenResDownCap", "GenResUpOut", "GenResDownOut",
    "StorCap", "ChgDown", "DisDown", "StorResUp", "StorResDown",
    "SocMax", "SocMin", "SocDyn", "SocBound",
    "CapLink", "PsLink", "EsLink", "Adequacy",
    "RampUp", "RampDown", "CfMin", "CfMax",
)
RESERVE_FAMILIES = ("ReserveUp", "ReserveDown")

_KEY_RE = re.compile(r"^([A-Za-z]+)\[([^\]]*)\]$")


def _fmt_index(index: tuple) -> str:
    return ",".join(str(v) for v in index)


def _parse_index(text: str) -> tuple:
    if not text:
        return ()
    return tuple(int(v) if v.lstrip("-").isdigit() else v for v in text.split(","))


class VarKey(NamedTuple):
    """Symbolic column key: a role tag plus its (i|j, y, t) indices."""

    role: str
    index: tuple

    def __str__(self) -> str:
        return f"{self.role}[{_fmt_index(self.index)}]"

    @classmethod
    def parse(cls, text: str) -> "VarKey":
        m = _KEY_RE.match(text)
        if not m:
            raise ValueError(f"not a variable key: {text!r}")
        return cls(m.group(1), _parse_index(m.group(2)))


class RowKey(NamedTuple):
    family: str
    index: tuple

    def __str__(self) -> str:
        return f"{self.family}[{_fmt_index(self.index)}]"

    @classmethod
    def parse(cls, text: str) -> "RowKey":
        m = _KEY_RE.match(text)
        if not m:
            raise ValueError(f"not a row key: {text!r}")
        return cls(m.group(1), _parse_index(m.group(2)))


def family_of(name: str) -> str:
    """Family (or role) tag of a key string such as ``"Balance[0,3]"``."""
    cut = name.find("[")
    return name if cut < 0 else name[:cut]


@dataclass(frozen=True)
class Block:
    """A contiguous run of columns or rows sharing one tag.

    ``entities`` maps the leading axis to technology numbers (``None`` when the
    block has no technology axis).  ``labels`` optionally replaces the integer
    values of the last axis in keys.
    """

    tag: str
    offset: int
    shape: tuple[int, ...]
    entities: tuple[int, ...] | None = None
    labels: tuple[str, ...] | None = None

    @property
    def size(self) -> int:
        return int(np.prod(self.shape)) if self.shape else 1

    def numbers(self) -> np.ndarray:
        return self.offset + np.arange(self.size).reshape(self.shape)

    def key_at(self, local: int) -> tuple:
        idx = list(np.unravel_index(local, self.shape))
        idx = [int(v) for v in idx]
        if self.entities is not None:
            idx[0] = self.entities[idx[0]]
        if self.labels is not None:
            idx[-1] = self.labels[idx[-1]]
        return tuple(idx)

    def local_of(self, index: tuple) -> int:
        idx = list(index)
        if len(idx) != len(self.shape):
            raise KeyError(index)
        if self.entities is not None:
            if idx[0] not in self.entities:
                raise KeyError(index)
            idx[0] = self.entities.index(idx[0])
        if self.labels is not None:
            if idx[-1] not in self.labels:
                raise KeyError(index)
            idx[-1] = self.labels.index(idx[-1])
        for v, n in zip(idx, self.shape):
            if not 0 <= v < n:
                raise KeyError(index)
        return int(np.ravel_multi_index(tuple(idx), self.shape))


class _BlockMap:
    """Bijection between key objects and 0-based numbers via ordered blocks."""

    key_type: type

    def __init__(self, blocks: Sequence[Block]):
        self.blocks: tuple[Block, ...] = tuple(b for b in blocks if b.size > 0)
        self._by_tag = {b.tag: b for b in self.blocks}
        self._starts = np.array([b.offset for b in self.blocks], dtype=np.int64)
        self.size = sum(b.size for b in self.blocks)

    def __len__(self) -> int:
        return self.size

    def __contains__(self, tag: str) -> bool:
        return tag in self._by_tag

    def tags(self) -> list[str]:
        return [b.tag for b in self.blocks]

    def block(self, tag: str) -> Block:
        return self._by_tag[tag]

    def numbers(self, tag: str) -> np.ndarray:
        """Array of numbers for ``tag`` shaped like its block (empty if absent)."""
        b = self._by_tag.get(tag)
        return b.numbers() if b is not None else np.zeros(0, dtype=np.int64)

    def key(self, number: int):
        if not 0 <= number < self.size:
            raise IndexError(number)
        k = int(np.searchsorted(self._starts, number, side="right")) - 1
        b = self.blocks[k]
        return self.key_type(b.tag, b.key_at(number - b.offset))

    def number(self, key) -> int:
        b = self._by_tag.get(key[0])
        if b is None:
            raise KeyError(key)
        return b.offset + b.local_of(tuple(key[1]))

    def keys(self) -> Iterator:
        for b in self.blocks:
            for local in range(b.size):
                yield self.key_type(b.tag, b.key_at(local))

    def names(self) -> list[str]:
        """Key strings for every number, built block-wise."""
        out: list[str] = []
        for b in self.blocks:
            grids = [np.arange(n) for n in b.shape]
            mesh = np.meshgrid(*grids, indexing="ij")
            cols = [m.reshape(-1) for m in mesh]
            parts: list[list[str]] = []
            for axis, col in enumerate(cols):
                if axis == 0 and b.entities is not None:
                    ent = np.asarray(b.entities)
                    parts.append([str(v) for v in ent[col]])
                elif axis == len(cols) - 1 and b.labels is not None:
                    parts.append([b.labels[v] for v in col])
                else:
                    parts.append([str(v) for v in col])
            out.extend(f"{b.tag}[{','.join(p)}]" for p in zip(*parts))
        return out

    def tag_array(self) -> np.ndarray:
        """Integer block ordinal per number; pairs with :meth:`tags`."""
        out = np.empty(self.size, dtype=np.int32)
        for k, b in enumerate(self.blocks):
            out[b.offset:b.offset + b.size] = k
        return out


class VarIndex(_BlockMap):
    key_type = VarKey


class RowIndex(_BlockMap):
    key_type = RowKey


@dataclass(frozen=True)
class BuildOptions:
    """``reserves_enabled``: None follows the scenario, True/False forces."""

    reserves_enabled: bool | None = None
    max_columns: int = DEFAULT_MAX_COLUMNS


@dataclass(frozen=True, eq=False)
class LpProblem:
    """Sparse LP ``min c.x`` s.t. ``A x (<=|=|>=) rhs``, ``lb <= x <= ub``.

    ``senses`` holds ``'L'``, ``'E'`` or ``'G'`` per row.  ``A`` is CSC with
    sorted indices and no duplicate entries.
    """

    name: str
    c: np.ndarray
    A: sp.csc_matrix
    senses: np.ndarray
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    var_index: VarIndex | None = None
    row_index: RowIndex | None = None
    names: tuple[tuple[str, ...], tuple[str, ...]] | None = field(default=None, repr=False)
    obj_offset: float = 0.0

    def __post_init__(self) -> None:
        m, n = self.A.shape
        if not (len(self.c) == len(self.lb) == len(self.ub) == n):
            raise ValueError("column-sized vectors disagree with matrix width")
        if not (len(self.senses) == len(self.rhs) == m):
            raise ValueError("row-sized vectors disagree with matrix height")
        for name in ("c", "rhs", "lb", "ub", "senses"):
            getattr(self, name).setflags(write=False)

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]

    @property
    def num_cols(self) -> int:
        return self.A.shape[1]

    @cached_property
    def col_names(self) -> tuple[str, ...]:
        if self.names is not None:
            return self.names[0]
        if self.var_index is not None:
            return tuple(self.var_index.names())
        return tuple(f"x{k}" for k in range(self.num_cols))

    @cached_property
    def row_names(self) -> tuple[str, ...]:
        if self.names is not None:
            return self.names[1]
        if self.row_index is not None:
            return tuple(self.row_index.names())
        return tuple(f"r{k}" for k in range(self.num_rows))

    @cached_property
    def row_families(self) -> np.ndarray:
        """Family tag per row (``"r"`` for anonymous rows)."""
        if self.row_index is not None:
            tags = np.array(self.row_index.tags(), dtype=object)
            return tags[self.row_index.tag_array()]
        return np.array([family_of(n) for n in self.row_names], dtype=object)

    @cached_property
    def row_lower(self) -> np.ndarray:
        return np.where(self.senses == "L", -np.inf, self.rhs)

    @cached_property
    def row_upper(self) -> np.ndarray:
        return np.where(self.senses == "G", np.inf, self.rhs)

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x) + self.obj_offset

    def triplets(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        coo = self.A.tocoo()
        order = np.lexsort((coo.row, coo.col))
        return coo.row[order], coo.col[order], coo.data[order]


def make_problem(
    c, rows, cols, vals, senses, rhs, lb=None, ub=None, *, shape=None, name="lp", **kwargs
) -> LpProblem:
    """Assemble an LpProblem from triplets (duplicates are summed)."""
    c = np.asarray(c, dtype=float)
    n = len(c)
    senses = np.asarray(list(senses) if isinstance(senses, str) else senses, dtype="<U1")
    m = len(senses)
    if shape is None:
        shape = (m, n)
    A = sp.coo_matrix((np.asarray(vals, float), (np.asarray(rows, np.int64), np.asarray(cols, np.int64))),
                      shape=shape).tocsc()
    A.sum_duplicates()
    A.eliminate_zeros()
    A.sort_indices()
    lb = np.zeros(n) if lb is None else np.asarray(lb, dtype=float)
    ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float)
    return LpProblem(name=name, c=c.copy(), A=A, senses=senses.copy(), rhs=np.asarray(rhs, float).copy(),
                     lb=lb.copy(), ub=ub.copy(), **kwargs)


# ------------------------------------------------------------------ indexing


def _dispatchable(s: Scenario) -> tuple[int, ...]:
    return tuple(i for i, g in enumerate(s.generators) if not g.profile_driven)


def index_variables(s: Scenario, max_columns: int = DEFAULT_MAX_COLUMNS) -> VarIndex:
    """Number every decision variable; all columns are non-negative."""
    ny, nt = s.num_years, s.num_timeslots
    n_i, n_j = len(s.generators), len(s.storages)
    gens = tuple(range(n_i))
    stos = tuple(range(n_j))
    specs: list[tuple[str, tuple[int, ...], tuple[int, ...] | None]] = []
    for role in GEN_TIME_ROLES:
        specs.append((role, (n_i, ny, nt), gens))
    specs.append(("Pcpv", (ny, nt) if s.pv_index is not None else (0,), None))
    specs.append(("Pcwp", (ny, nt) if s.wp_index is not None else (0,), None))
    for role in STORAGE_TIME_ROLES:
        specs.append((role, (n_j, ny, nt), stos))
    specs.append(("Es", (n_j, ny, nt + 1), stos))
    specs.append(("Pgcap", (n_i, ny), gens))
    specs.append(("Pginst", (n_i, ny), gens))
    for role in ("Pscap", "Psinst", "Escap", "Esinst"):
        specs.append((role, (n_j, ny), stos))

    total = sum(int(np.prod(shape)) for _, shape, _ in specs)
    if total > max_columns:
        raise ScenarioError(f"dimension overflow: {total} columns exceeds limit {max_columns}")
    blocks, offset = [], 0
    for role, shape, ents in specs:
        b = Block(role, offset, shape, ents)
        blocks.append(b)
        offset += b.size
    return VarIndex(blocks)


def discount_weights(s: Scenario) -> np.ndarray:
    """Present-value weight per year, first modelled year discounted once."""
    r = s.globals.discount_rate
    return 1.0 / (1.0 + r) ** np.arange(1, s.num_years + 1)


def build_objective(s: Scenario, idx: VarIndex) -> np.ndarray:
    """Cost vector with annual cost terms substituted in and discounted."""
    c = np.zeros(len(idx))
    w = discount_weights(s)
    h = s.globals.timeslot_hours
    fw = s.globals.fixed_cost_weight
    pgcap, pg = idx.numbers("Pgcap"), idx.numbers("Pg")
    for i, g in enumerate(s.generators):
        fixed = g.annual_expense_rate * np.asarray(g.fixed_cost) * fw
        c[pgcap[i]] = fixed * w
        c[pg[i]] = (np.asarray(g.variable_cost) * h * w)[:, None]
    pscap, escap = idx.numbers("Pscap"), idx.numbers("Escap")
    for j, st in enumerate(s.storages):
        c[pscap[j]] = st.power_expense_rate * np.asarray(st.power_fixed_cost) * fw * w
        c[escap[j]] = st.energy_expense_rate * np.asarray(st.energy_fixed_cost) * fw * w
    return c


def column_bounds(s: Scenario, idx: VarIndex) -> tuple[np.ndarray, np.ndarray]:
    lb = np.zeros(len(idx))
    ub = np.full(len(idx), np.inf)
    pgcap = idx.numbers("Pgcap")
    for i, g in enumerate(s.generators):
        ub[pgcap[i]] = g.cap_upper
        if g.profile_driven:
            ub[idx.numbers("Ru")[i]] = 0.0
            ub[idx.numbers("Rd")[i]] = 0.0
    for j, st in enumerate(s.storages):
        ub[idx.numbers("Pscap")[j]] = st.power_cap_upper
        ub[idx.numbers("Escap")[j]] = st.energy_cap_upper
    return lb, ub


# -------------------------------------------------------------- row families


@dataclass
class RowFamily:
    """Rows of one family before global numbering.

    ``local``/``cols``/``vals`` are triplets with row numbers local to the
    family; ``rhs`` is flattened in block order.
    """

    family: str
    shape: tuple[int, ...]
    sense: str
    rhs: np.ndarray
    entities: tuple[int, ...] | None = None
    labels: tuple[str, ...] | None = None
    local: list[np.ndarray] = field(default_factory=list)
    cols: list[np.ndarray] = field(default_factory=list)
    vals: list[np.ndarray] = field(default_factory=list)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def add(self, cols: np.ndarray, coef) -> "RowFamily":
        """Add one term.  ``cols`` has the family shape, optionally with extra
        leading axes that are summed into the same rows."""
        cols = np.asarray(cols)
        if cols.size == 0:
            return self
        rows = np.arange(self.size).reshape(self.shape)
        rows = np.broadcast_to(rows, cols.shape)
        vals = np.broadcast_to(np.asarray(coef, dtype=float), cols.shape)
        self.local.append(rows.reshape(-1))
        self.cols.append(cols.reshape(-1))
        self.vals.append(np.array(vals, dtype=float).reshape(-1))
        return self


def _family(name, shape, sense, rhs, entities=None, labels=None) -> RowFamily:
    size = int(np.prod(shape))
    rhs = np.broadcast_to(np.asarray(rhs, dtype=float), shape).reshape(-1).copy() if size else np.zeros(0)
    return RowFamily(name, tuple(shape), sense, rhs, entities, labels)


def build_balance_rows(s: Scenario, idx: VarIndex) -> list[RowFamily]:
    ny, nt = s.num_years, s.num_timeslots
    fam = _family("Balance", (ny, nt), "E", s.series.load)
    fam.add(idx.numbers("Pg"), 1.0)
    fam.add(idx.numbers("Psout"), 1.0)
    fam.add(idx.numbers("Psin"), -1.0)
    return [fam]


def build_reserve_rows(s: Scenario, idx: VarIndex) -> list[RowFamily]:
    """Upward and downward regulation-reserve requirement rows.

    VRE-driven requirement terms sit on the left with the delivered (post
    curtailment) output, so curtailment lowers the requirement.
    """
    ny, nt = s.num_years, s.num_timeslots
    rp = s.reserves
    load = s.series.load
    pg = idx.numbers("Pg")
    up = _family("ReserveUp", (ny, nt), "G", rp.load_rate_up * load)
    up.add(idx.numbers("Ru"), 1.0)
    up.add(idx.numbers("Rscd"), 1.0)
    up.add(idx.numbers("Rsdu"), 1.0)
    down = _family("ReserveDown", (ny, nt), "G", rp.effective_load_rate_down * load)
    down.add(idx.numbers("Rd"), 1.0)
    down.add(idx.numbers("Rscu"), 1.0)
    down.add(idx.numbers("Rsdd"), 1.0)
    if s.pv_index is not None:
        up.add(pg[s.pv_index], -rp.pv_down)
        down.add(pg[s.pv_index], -rp.pv_up)
    if s.wp_index is not None:
        up.add(pg[s.wp_index], -rp.wp_down)
        down.add(pg[s.wp_index], -rp.wp_up)
    return [up, down]


def build_generator_rows(s: Scenario, idx: VarIndex) -> list[RowFamily]:
    ny, nt = s.num_years, s.num_timeslots
    disp = _dispatchable(s)
    d = list(disp)
    pg, ru, rd = (idx.numbers(r) for r in GEN_TIME_ROLES)
    cap = idx.numbers("Pgcap")
    out: list[RowFamily] = []
    shape = (len(d), ny, nt)
    if d:
        pg_d, ru_d, rd_d = pg[d], ru[d], rd[d]
        cap_t = np.broadcast_to(cap[d][:, :, None], shape)
        r_up = np.array([s.generators[i].reserve_up_rate for i in d])[:, None, None]
        r_dn = np.array([s.generators[i].reserve_down_rate for i in d])[:, None, None]
        out.append(_family("GenCap", shape, "L", 0.0, disp).add(pg_d, 1.0).add(ru_d, 1.0).add(cap_t, -1.0))
        out.append(_family("GenDown", shape, "G", 0.0, disp).add(pg_d, 1.0).add(rd_d, -1.0))
    for fam_name, prof_idx, curtail, profile in (
        ("PvDef", s.pv_index, "Pcpv", s.series.pv_profile),
        ("WpDef", s.wp_index, "Pcwp", s.series.wp_profile),
    ):
        if prof_idx is None:
            continue
        fam = _family(fam_name, (ny, nt), "E", 0.0)
        fam.add(pg[prof_idx], 1.0)
        fam.add(idx.numbers(curtail), 1.0)
        fam.add(np.broadcast_to(cap[prof_idx][:, None], (ny, nt)), -np.broadcast_to(profile, (ny, nt)))
        out.append(fam)
    if d:
        out.append(_family("GenResUpCap", shape, "L", 0.0, disp).add(ru_d, 1.0).add(cap_t, -r_up))
        out.append(_family("GenResDownCap", shape, "L", 0.0, disp).add(rd_d, 1.0).add(cap_t, -r_dn))
        out.append(_family("GenResUpOut", shape, "L", 0.0, disp).add(ru_d, 1.0).add(pg_d, -1.0))
        out.append(_family("GenResDownOut", shape, "L", 0.0, disp).add(rd_d, 1.0).add(pg_d, -1.0))

    for fam_name, attr in (("RampUp", "ramp_up"), ("RampDown", "ramp_down")):
        ents = tuple(i for i in disp if getattr(s.generators[i], attr) is not None)
        if not ents or nt < 2:
            continue
        e = list(ents)
        rshape = (len(e), ny, nt - 1)
        rate = np.array([getattr(s.generators[i], attr) for i in e])[:, None, None]
        fam = _family(fam_name, rshape, "L", 0.0, ents)
        later, earlier = pg[e][:, :, 1:], pg[e][:, :, :-1]
        if fam_name == "RampUp":
            fam.add(later, 1.0).add(earlier, -1.0)
        else:
            fam.add(earlier, 1.0).add(later, -1.0)
        fam.add(np.broadcast_to(cap[e][:, :, None], rshape), -rate)
        out.append(fam)

    for fam_name, attr, sense in (("CfMin", "cf_min", "G"), ("CfMax", "cf_max", "L")):
        ents = tuple(i for i in disp if getattr(s.generators[i], attr) is not None)
        if not ents:
            continue
        e = list(ents)
        frac = np.array([getattr(s.generators[i], attr) for i in e])[:, None]
        fam = _family(fam_name, (len(e), ny), sense, 0.0, ents)
        fam.add(np.moveaxis(pg[e], 2, 0), 1.0)
        fam.add(cap[e], -frac * nt)
        out.append(fam)
    return out


def build_storage_rows(s: Scenario, idx: VarIndex) -> list[RowFamily]:
    ny, nt = s.num_years, s.num_timeslots
    n_j = len(s.storages)
    if n_j == 0:
        return []
    ents = tuple(range(n_j))
    h = s.globals.timeslot_hours
    psin, psout, rscu, rscd, rsdu, rsdd = (idx.numbers(r) for r in STORAGE_TIME_ROLES)
    es = idx.numbers("Es")
    shape = (n_j, ny, nt)

    def per_t(role: str) -> np.ndarray:
        return np.broadcast_to(idx.numbers(role)[:, :, None], shape)

    def attr(name: str) -> np.ndarray:
        return np.array([getattr(st, name) for st in s.storages])[:, None, None]

    pscap, escap = per_t("Pscap"), per_t("Escap")
    mu = attr("leg_efficiency")
    out = [
        _family("StorCap", shape, "L", 0.0, ents).add(psin, 1.0).add(psout, 1.0).add(rscu, 1.0)
        .add(rsdu, 1.0).add(pscap, -1.0),
        _family("ChgDown", shape, "G", 0.0, ents).add(psin, 1.0).add(rscd, -1.0),
        _family("DisDown", shape, "G", 0.0, ents).add(psout, 1.0).add(rsdd, -1.0),
        _family("StorResUp", shape, "L", 0.0, ents).add(rscu, 1.0).add(rsdu, 1.0)
        .add(pscap, -attr("reserve_up_rate")),
        _family("StorResDown", shape, "L", 0.0, ents).add(rscd, 1.0).add(rsdd, 1.0)
        .add(pscap, -attr("reserve_down_rate")),
        _family("SocMax", shape, "L", 0.0, ents).add(es[:, :, :nt], 1.0).add(escap, -1.0),
        _family("SocMin", shape, "G", 0.0, ents).add(es[:, :, :nt], 1.0).add(escap, -attr("soc_min")),
        _family("SocDyn", shape, "E", 0.0, ents).add(es[:, :, 1:], 1.0).add(es[:, :, :nt], -1.0)
        .add(psin, -mu * h).add(psout, h / mu),
    ]
    bshape = (n_j, ny, 2)
    ends = np.stack([es[:, :, 0], es[:, :, nt]], axis=-1)
    sb = np.array([st.soc_boundary for st in s.storages])[:, None, None]
    bound = _family("SocBound", bshape, "E", 0.0, ents, ("start", "end"))
    bound.add(ends, 1.0)
    bound.add(np.broadcast_to(idx.numbers("Escap")[:, :, None], bshape), -sb)
    out.append(bound)
    return out


def _link(name: str, cap: np.ndarray, inst: np.ndarray, existing: np.ndarray, ents) -> RowFamily:
    """capacity(y) - sum_{tau<=y} installs(tau) = existing(y)."""
    n, ny = cap.shape
    fam = _family(name, (n, ny), "E", existing, ents)
    fam.add(cap, 1.0)
    # lower-triangular accumulation: stack installs for tau <= y along a new axis
    tau, yy = np.meshgrid(np.arange(ny), np.arange(ny), indexing="ij")
    mask = tau <= yy
    rows_y = yy[mask]
    cols = inst[:, tau[mask]]  # shape (n, k)
    local = (np.arange(n)[:, None] * ny + rows_y[None, :])
    fam.local.append(local.reshape(-1))
    fam.cols.append(cols.reshape(-1))
    fam.vals.append(np.full(cols.size, -1.0))
    return fam


def build_capacity_rows(s: Scenario, idx: VarIndex) -> list[RowFamily]:
    ny = s.num_years
    n_i, n_j = len(s.generators), len(s.storages)
    out = [_link("CapLink", idx.numbers("Pgcap"), idx.numbers("Pginst"),
                 np.array([g.existing_capacity for g in s.generators]).reshape(n_i, ny), tuple(range(n_i)))]
    if n_j:
        ents = tuple(range(n_j))
        out.append(_link("PsLink", idx.numbers("Pscap"), idx.numbers("Psinst"),
                         np.array([st.existing_power for st in s.storages]), ents))
        out.append(_link("EsLink", idx.numbers("Escap"), idx.numbers("Esinst"),
                         np.array([st.existing_energy for st in s.storages]), ents))
    # firm capacity is time-invariant, so one row at the peak slot suffices
    peak = s.series.load.max(axis=1)
    adequacy = _family("Adequacy", (ny,), "G", (1.0 + s.globals.reserve_margin) * peak)
    firm = [i for i in range(n_i) if i not in (s.pv_index, s.wp_index)]
    adequacy.add(idx.numbers("Pgcap")[firm], 1.0)
    if n_j:
        adequacy.add(idx.numbers("Pscap"), 1.0)
    out.append(adequacy)
    return out


def reserves_active(s: Scenario, opts: BuildOptions | None = None) -> bool:
    if opts is not None and opts.reserves_enabled is not None:
        return opts.reserves_enabled
    return s.reserves.enabled


def build(s: Scenario, opts: BuildOptions | None = None) -> tuple[LpProblem, VarIndex]:
    """Build the full LP for ``s``.  Raises ScenarioError if ``s`` is invalid."""
    opts = opts or BuildOptions()
    problems = validate(s)
    if problems:
        raise ScenarioError("invalid scenario:\n  " + "\n  ".join(str(v) for v in problems))
    idx = index_variables(s, opts.max_columns)
    families = build_balance_rows(s, idx)
    if reserves_active(s, opts):
        families += build_reserve_rows(s, idx)
    families += build_generator_rows(s, idx)
    families += build_storage_rows(s, idx)
    families += build_capacity_rows(s, idx)
    by_name = {f.family: f for f in families}
    ordered = [by_name[name] for name in ROW_FAMILIES if name in by_name and by_name[name].size > 0]

    blocks, rows, cols, vals, senses, rhs = [], [], [], [], [], []
    offset = 0
    for f in ordered:
        blocks.append(Block(f.family, offset, f.shape, f.entities, f.labels))
        for loc, col, val in zip(f.local, f.cols, f.vals):
            rows.append(loc + offset)
            cols.append(col)
            vals.append(val)
        senses.append(np.full(f.size, f.sense))
        rhs.append(f.rhs)
        offset += f.size
    row_index = RowIndex(blocks)
    lb, ub = column_bounds(s, idx)
    prob = make_problem(
        build_objective(s, idx),
        np.concatenate(rows) if rows else [],
        np.concatenate(cols) if cols else [],
        np.concatenate(vals) if vals else [],
        np.concatenate(senses) if senses else np.zeros(0, "<U1"),
        np.concatenate(rhs) if rhs else [],
        lb, ub,
        shape=(offset, len(idx)),
        name=s.name[:32],
        var_index=idx,
        row_index=row_index,
    )
    if not np.all(np.isfinite(prob.A.data)) or not np.all(np.isfinite(prob.c)):
        raise ScenarioError("non-finite coefficient in assembled problem")
    LOGGER.info("built %s: %d rows, %d columns, %d nonzeros (reserves %s)", prob.name,
                prob.num_rows, prob.num_cols, prob.A.nnz, "on" if reserves_active(s, opts) else "off")
    return prob, idx


def census(s: Scenario, opts: BuildOptions | None = None) -> dict[str, int]:
    """Closed-form row and column counts per family/role, without building."""
    ny, nt = s.num_years, s.num_timeslots
    n_i, n_j = len(s.generators), len(s.storages)
    disp = _dispatchable(s)
    n_d = len(disp)
    has_pv = s.pv_index is not None
    has_wp = s.wp_index is not None
    gens = s.generators
    cols = {
        "Pg": n_i * ny * nt, "Ru": n_i * ny * nt, "Rd": n_i * ny * nt,
        "Pcpv": ny * nt * has_pv, "Pcwp": ny * nt * has_wp,
        **{r: n_j * ny * nt for r in STORAGE_TIME_ROLES},
        "Es": n_j * ny * (nt + 1),
        "Pgcap": n_i * ny, "Pginst": n_i * ny,
        "Pscap": n_j * ny, "Psinst": n_j * ny, "Escap": n_j * ny, "Esinst": n_j * ny,
    }
    rows = {
        "Balance": ny * nt,
        "ReserveUp": ny * nt * reserves_active(s, opts),
        "ReserveDown": ny * nt * reserves_active(s, opts),
        **{f: n_d * ny * nt for f in ("GenCap", "GenDown", "GenResUpCap", "GenResDownCap",
                                      "GenResUpOut", "GenResDownOut")},
        "PvDef": ny * nt * has_pv, "WpDef": ny * nt * has_wp,
        **{f: n_j * ny * nt for f in ("StorCap", "ChgDown", "DisDown", "StorResUp", "StorResDown",
                                      "SocMax", "SocMin", "SocDyn")},
        "SocBound": n_j * ny * 2,
        "CapLink": n_i * ny, "PsLink": n_j * ny, "EsLink": n_j * ny, "Adequacy": ny,
        "RampUp": sum(gens[i].ramp_up is not None for i in disp) * ny * (nt - 1),
        "RampDown": sum(gens[i].ramp_down is not None for i in disp) * ny * (nt - 1),
        "CfMin": sum(gens[i].cf_min is not None for i in disp) * ny,
        "CfMax": sum(gens[i].cf_max is not None for i in disp) * ny,
    }
    return {"columns": sum(cols.values()), "rows": sum(rows.values()),
            **{f"col:{k}": v for k, v in cols.items()}, **{f"row:{k}": v for k, v in rows.items()}}
