import numpy as np
import pytest

from factories import micro, mps_problem_set, odd_problem
from gridmix.builder import ROW_FAMILIES, build, make_problem
from gridmix.mps import MpsError, format_number, name_map_path, problems_equal, read_mps, read_name_map, write_mps


ROUND_TRIP = mps_problem_set()


@pytest.mark.parametrize("name", sorted(ROUND_TRIP))
def test_round_trip_is_exact(tmp_path, name):
    p = ROUND_TRIP[name]()
    path = write_mps(p, tmp_path / f"{name}.mps")
    q = read_mps(path)
    assert problems_equal(p, q)
    assert q.row_names == p.row_names and q.col_names == p.col_names


def test_round_trip_set_covers_every_row_family():
    seen = set()
    for make in ROUND_TRIP.values():
        p = make()
        if p.row_index is not None:
            seen |= set(p.row_index.tags())
    assert seen == set(ROW_FAMILIES)


def test_balance_rows_are_equalities(tmp_path):
    p = build(micro([1.0, 2.0]))[0]
    text = write_mps(p, tmp_path / "m.mps").read_text()
    assert " E  R0000000" in text
    assert read_name_map(name_map_path(tmp_path / "m.mps"))["R0000000"] == "Balance[0,0]"


def test_third_is_printed_with_twelve_digits_and_is_a_fixpoint():
    text = format_number(1 / 3, exact=False)
    assert text == "3.33333333333E-01"
    assert format_number(float(text), exact=False) == text
    assert float(format_number(1 / 3)) == 1 / 3


def test_strict_mode_writes_twelve_digits(tmp_path):
    p = make_problem([1 / 3], [0], [0], [1.0], "G", [1.0])
    body = write_mps(p, tmp_path / "s.mps", exact=False).read_text()
    assert "3.33333333333E-01" in body
    q = read_mps(tmp_path / "s.mps")
    assert q.c[0] == pytest.approx(1 / 3, rel=1e-11)


def test_reads_without_name_map(tmp_path):
    p = odd_problem()
    path = write_mps(p, tmp_path / "n.mps")
    name_map_path(path).unlink()
    q = read_mps(path)
    assert problems_equal(p, q)
    assert q.col_names[0] == "C0000000"


def test_unwritable_path():
    with pytest.raises(OSError):
        write_mps(odd_problem(), "/nonexistent-dir/x.mps")


@pytest.mark.parametrize("body, message", [
    ("NAME x\nROWS\n N COST\n L R1\nCOLUMNS\n    X1 R9 1.0\nENDATA\n", "unknown row"),
    ("NAME x\nROWS\n Q R1\nENDATA\n", "malformed ROWS"),
    ("NAME x\nROWS\n N COST\nRANGES\nENDATA\n", "RANGES"),
    ("NAME x\nROWS\n N COST\nBOGUS\nENDATA\n", "unknown section"),
    ("NAME x\nROWS\n N COST\n", "missing ENDATA"),
    ("NAME x\nROWS\n N COST\n L R1\nCOLUMNS\n    X1 R1 abc\nENDATA\n", "expected a number"),
])
def test_malformed_files(tmp_path, body, message):
    path = tmp_path / "bad.mps"
    path.write_text(body)
    with pytest.raises(MpsError, match=message):
        read_mps(path)


def test_hand_written_file_parses(tmp_path):
    path = tmp_path / "h.mps"
    path.write_text(
        "* comment\nNAME          tiny\nROWS\n N  obj\n G  c1\n L  c2\nCOLUMNS\n"
        "    x  obj  1.0  c1  1.0\n    y  obj  2.0  c1  1.0\n    y  c2  1.0\n"
        "RHS\n    rhs  c1  3.0  c2  2.0\nBOUNDS\n UP BND  x  2.0\n MI BND  y\nENDATA\n")
    p = read_mps(path)
    assert p.name == "tiny"
    assert list(p.senses) == ["G", "L"]
    assert p.ub[0] == 2.0 and p.lb[1] == -np.inf
    np.testing.assert_array_equal(p.A.toarray(), [[1.0, 1.0], [0.0, 1.0]])
