"""Fixed-format MPS export and import.

Names are mangled to 8 characters (``C0000012`` for columns, ``R0000034``
for rows, ``COST`` for the objective) and the symbolic keys are written to a
sidecar CSV next to the MPS file (``<file>.names.csv``).  Numbers use 12
significant digits whenever that reproduces the double exactly and fall back
to 17 otherwise, so ``read_mps(write_mps(p))`` is bit-identical.
"""

from __future__ import annotations

import csv
import logging
from pathlib import Path

import numpy as np

from gridmix.builder import LpProblem, make_problem

log = logging.getLogger(__name__)

OBJECTIVE_ROW = "COST"
_SECTIONS = ("NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "RANGES", "ENDATA", "OBJSENSE")


class MpsError(ValueError):
    """Malformed or unsupported MPS input."""


def format_number(v: float, exact: bool = True) -> str:
    """12-significant-digit rendering; widened to 17 digits if it would lose bits."""
    text = "%.11E" % v
    if exact and float(text) != v:
        text = "%.16E" % v
    return text


def col_label(j: int) -> str:
    return "C%07d" % j


def row_label(i: int) -> str:
    return "R%07d" % i


def name_map_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".names.csv")


def _field_line(code: str, a: str, b: str = "", c: str = "", d: str = "", e: str = "") -> str:
    # fixed-format columns 2-3, 5-12, 15-22, 25-36, 40-47, 50-61; numbers may overrun
    line = " %-2s %-8s  %-8s  %12s" % (code, a, b, c) if b else " %-2s %-8s" % (code, a)
    if d:
        line += "   %-8s  %12s" % (d, e)
    return line.rstrip()


def write_mps(p: LpProblem, path: str | Path, exact: bool = True) -> Path:
    """Write ``p`` as fixed-format MPS plus a sidecar name map; returns the MPS path."""
    path = Path(path)
    fmt = lambda v: format_number(float(v), exact)  # noqa: E731
    out: list[str] = []
    title = "".join(ch for ch in p.name if not ch.isspace())[:8] or "GRIDMIX"
    out.append("NAME          " + title)
    out.append("ROWS")
    out.append(" N  " + OBJECTIVE_ROW)
    for i, s in enumerate(p.senses):
        out.append(f" {s}  {row_label(i)}")

    out.append("COLUMNS")
    A = p.A.tocsc()
    for j in range(p.num_cols):
        lo, hi = A.indptr[j], A.indptr[j + 1]
        entries: list[tuple[str, float]] = []
        if p.c[j] != 0.0:
            entries.append((OBJECTIVE_ROW, p.c[j]))
        entries.extend((row_label(int(i)), v) for i, v in zip(A.indices[lo:hi], A.data[lo:hi]))
        if not entries:
            # keep the column declared so the width survives the round trip
            entries.append((OBJECTIVE_ROW, 0.0))
        for k in range(0, len(entries), 2):
            pair = entries[k:k + 2]
            first = (pair[0][0], fmt(pair[0][1]))
            second = (pair[1][0], fmt(pair[1][1])) if len(pair) > 1 else ("", "")
            out.append(_field_line("", col_label(j), first[0], first[1], *second))

    out.append("RHS")
    rhs_entries = [(row_label(i), v) for i, v in enumerate(p.rhs) if v != 0.0]
    if p.obj_offset != 0.0:
        # MPS convention: the objective RHS is the negated constant term
        rhs_entries.append((OBJECTIVE_ROW, -p.obj_offset))
    for k in range(0, len(rhs_entries), 2):
        pair = rhs_entries[k:k + 2]
        second = (pair[1][0], fmt(pair[1][1])) if len(pair) > 1 else ("", "")
        out.append(_field_line("", "RHS", pair[0][0], fmt(pair[0][1]), *second))

    out.append("BOUNDS")
    for j in range(p.num_cols):
        lb, ub, name = p.lb[j], p.ub[j], col_label(j)
        if lb == ub:
            out.append(_field_line("FX", "BND", name, fmt(lb)))
            continue
        if lb == -np.inf and ub == np.inf:
            out.append(_field_line("FR", "BND", name))
            continue
        if lb == -np.inf:
            out.append(_field_line("MI", "BND", name))
        elif lb != 0.0:
            out.append(_field_line("LO", "BND", name, fmt(lb)))
        if ub != np.inf:
            out.append(_field_line("UP", "BND", name, fmt(ub)))
    out.append("ENDATA")

    try:
        path.write_text("\n".join(out) + "\n")
        with open(name_map_path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["mangled_name", "symbolic_key"])
            w.writerow([OBJECTIVE_ROW, "objective"])
            for i, n in enumerate(p.row_names):
                w.writerow([row_label(i), n])
            for j, n in enumerate(p.col_names):
                w.writerow([col_label(j), n])
    except OSError as exc:
        raise OSError(f"cannot write MPS file {path}: {exc}") from exc
    log.info("wrote %s (%d rows, %d columns, %d nonzeros)", path, p.num_rows, p.num_cols, p.A.nnz)
    return path


def read_name_map(path: str | Path) -> dict[str, str]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["mangled_name", "symbolic_key"]:
        raise MpsError(f"{path}: not a name map")
    return {r[0]: r[1] for r in rows[1:]}


def _number(tok: str, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise MpsError(f"line {lineno}: expected a number, got {tok!r}") from None


def read_mps(path: str | Path) -> LpProblem:
    """Parse an MPS file (fields split on whitespace; names must not contain blanks).

    Symbolic row/column names are restored from the sidecar map when present.
    RANGES and maximisation are not supported.
    """
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise MpsError(f"cannot read {path}: {exc}") from exc

    name = path.stem
    row_pos: dict[str, int] = {}
    senses: list[str] = []
    obj_name: str | None = None
    col_pos: dict[str, int] = {}
    c: list[float] = []
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    rhs: dict[int, float] = {}
    offset = 0.0
    bounds: dict[int, list[float]] = {}
    section = None
    seen_end = False

    def row_of(tok: str, lineno: int) -> int:
        if tok == obj_name:
            return -1
        try:
            return row_pos[tok]
        except KeyError:
            raise MpsError(f"line {lineno}: unknown row {tok!r}") from None

    for lineno, raw in enumerate(lines, 1):
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            head = raw.split()
            section = head[0]
            if section not in _SECTIONS:
                raise MpsError(f"line {lineno}: unknown section {section!r}")
            if section == "NAME":
                name = head[1] if len(head) > 1 else name
            elif section == "RANGES":
                raise MpsError(f"line {lineno}: RANGES section is not supported")
            elif section == "OBJSENSE":
                raise MpsError(f"line {lineno}: OBJSENSE is not supported")
            elif section == "ENDATA":
                seen_end = True
                break
            continue
        tok = raw.split()
        if section == "ROWS":
            if len(tok) != 2 or tok[0] not in ("N", "E", "L", "G"):
                raise MpsError(f"line {lineno}: malformed ROWS entry")
            if tok[0] == "N":
                if obj_name is None:
                    obj_name = tok[1]
                continue
            if tok[1] in row_pos:
                raise MpsError(f"line {lineno}: duplicate row {tok[1]!r}")
            row_pos[tok[1]] = len(senses)
            senses.append(tok[0])
        elif section == "COLUMNS":
            if len(tok) not in (3, 5):
                raise MpsError(f"line {lineno}: malformed COLUMNS entry")
            j = col_pos.setdefault(tok[0], len(col_pos))
            if j == len(c):
                c.append(0.0)
            for r_tok, v_tok in zip(tok[1::2], tok[2::2]):
                i, v = row_of(r_tok, lineno), _number(v_tok, lineno)
                if i < 0:
                    c[j] += v
                else:
                    rows.append(i)
                    cols.append(j)
                    vals.append(v)
        elif section == "RHS":
            if len(tok) not in (3, 5):
                raise MpsError(f"line {lineno}: malformed RHS entry")
            for r_tok, v_tok in zip(tok[1::2], tok[2::2]):
                i, v = row_of(r_tok, lineno), _number(v_tok, lineno)
                if i < 0:
                    offset = -v
                else:
                    rhs[i] = v
        elif section == "BOUNDS":
            if len(tok) < 3:
                raise MpsError(f"line {lineno}: malformed BOUNDS entry")
            kind, col = tok[0], tok[2]
            if col not in col_pos:
                raise MpsError(f"line {lineno}: unknown column {col!r}")
            b = bounds.setdefault(col_pos[col], [0.0, np.inf])
            if kind in ("FR", "MI", "PL"):
                if kind == "FR":
                    b[0], b[1] = -np.inf, np.inf
                elif kind == "MI":
                    b[0] = -np.inf
                else:
                    b[1] = np.inf
                continue
            if len(tok) != 4:
                raise MpsError(f"line {lineno}: bound {kind} needs a value")
            v = _number(tok[3], lineno)
            if kind == "FX":
                b[0] = b[1] = v
            elif kind == "LO":
                b[0] = v
            elif kind == "UP":
                b[1] = v
            else:
                raise MpsError(f"line {lineno}: unsupported bound type {kind!r}")
        else:
            raise MpsError(f"line {lineno}: data outside a section")
    if not seen_end:
        raise MpsError(f"{path}: missing ENDATA")

    m, n = len(senses), len(col_pos)
    lb, ub = np.zeros(n), np.full(n, np.inf)
    for j, (lo, hi) in bounds.items():
        lb[j], ub[j] = lo, hi
    b = np.zeros(m)
    for i, v in rhs.items():
        b[i] = v

    map_file = name_map_path(path)
    mapping = read_name_map(map_file) if map_file.exists() else {}
    names = (tuple(mapping.get(k, k) for k in col_pos), tuple(mapping.get(r, r) for r in row_pos))
    return make_problem(c, rows, cols, vals, senses, b, lb, ub, shape=(m, n), name=name,
                        names=names, obj_offset=offset)


def problems_equal(a: LpProblem, b: LpProblem) -> bool:
    """Field-by-field bitwise equality on everything MPS carries."""
    if a.A.shape != b.A.shape:
        return False
    ta, tb = a.triplets(), b.triplets()
    return (
        all(np.array_equal(x, y) for x, y in zip(ta, tb))
        and np.array_equal(a.c, b.c)
        and np.array_equal(a.senses, b.senses)
        and np.array_equal(a.rhs, b.rhs)
        and np.array_equal(a.lb, b.lb)
        and np.array_equal(a.ub, b.ub)
        and a.obj_offset == b.obj_offset
    )
