#!/usr/bin/env python3
"""
Tests for the lattice text format, family specs and report emitters
"""

import json
import math

import numpy as np
import pytest

from convergence import MissingTarget, check_convergence, family_sequence, scale_one_axis
from lattice_core import RankDeficient, make_lattice, shortest_vector
from lattice_io import (
    ParseError,
    cell_record,
    cell_summary,
    convergence_record,
    convergence_summary,
    dumps_fixed,
    format_lattice,
    hausdorff_csv,
    limit_record,
    parse_family_spec,
    parse_lattice_file,
    parse_lattice_text,
    radii_record,
    vertices_csv,
    write_lattice_file,
)
from limit_sets import estimate_limit_sets
from voronoi_cell import cell_volume, radii, realize_cell

Z2 = make_lattice(np.eye(2))


# --- lattice text ---------------------------------------------------------

def test_parse_square_lattice():
    lat = parse_lattice_text("2\n1 0\n0 1\n")
    assert lat.dim == 2
    assert np.array_equal(lat.basis, np.eye(2))


def test_parse_with_comments_and_blank_lines():
    text = "# hexagonal\n\n2  # dimension\n1 0\n\n0.5 0.8660254037844386  # second row\n"
    lat = parse_lattice_text(text)
    assert lat.det == pytest.approx(math.sqrt(3) / 2, rel=1e-12)


def test_missing_row_reports_position():
    with pytest.raises(ParseError) as info:
        parse_lattice_text("2\n1 0\n", source="short.txt")
    assert info.value.line == 3
    assert "short.txt:3:1" in str(info.value)


def test_bad_number_reports_column():
    with pytest.raises(ParseError) as info:
        parse_lattice_text("2\n1 zero\n0 1\n")
    assert (info.value.line, info.value.column) == (2, 3)


def test_wrong_row_length():
    with pytest.raises(ParseError) as info:
        parse_lattice_text("2\n1 0 0\n0 1\n")
    assert info.value.line == 2


def test_extra_rows_rejected():
    with pytest.raises(ParseError) as info:
        parse_lattice_text("1\n1\n2\n")
    assert info.value.line == 3


@pytest.mark.parametrize("text", ["", "x\n1\n", "0\n", "2 2\n1 0\n0 1\n"])
def test_bad_header(text):
    with pytest.raises(ParseError):
        parse_lattice_text(text)


def test_rank_deficient_file():
    with pytest.raises(RankDeficient):
        parse_lattice_text("2\n1 0\n2 0\n")


def test_format_round_trips_exactly(tmp_path):
    rng = np.random.default_rng(3)
    lat = make_lattice(np.eye(3) + rng.uniform(-0.4, 0.4, (3, 3)))
    path = write_lattice_file(lat, tmp_path / "lat.txt", comment="random")
    assert np.array_equal(parse_lattice_file(path).basis, lat.basis)
    assert format_lattice(lat).startswith("3\n")


# --- family specs ---------------------------------------------------------

def test_scale_spec():
    seq = parse_family_spec("scale-one-axis(1)", Z2)
    assert np.allclose(seq.basis(2), [[1.5, 0.0], [0.0, 1.0]])


def test_scale_spec_with_axis():
    seq = parse_family_spec("scale-one-axis(2, 1)", Z2)
    assert np.allclose(seq.basis(2), [[1.0, 0.0], [0.0, 2.0]])


def test_perturb_specs():
    a = parse_family_spec("perturb-all(0.3, 7)", Z2)
    b = parse_family_spec("perturb-all(0.3,7)", Z2)
    assert np.array_equal(a.basis(4), b.basis(4))
    entry = parse_family_spec("perturb-entry(0, 1, 2)", Z2)
    assert np.allclose(entry.basis(4), [[1.0, 0.5], [0.0, 1.0]])


def test_alternate_and_constant_specs(tmp_path):
    a = write_lattice_file(Z2, tmp_path / "a.txt")
    b = write_lattice_file(make_lattice([[0.5, 0], [0, 1]]), tmp_path / "b.txt")
    seq = parse_family_spec(f"alternate({a}, {b})", Z2)
    assert np.allclose(seq.basis(1), np.eye(2))
    assert np.allclose(seq.basis(2), [[0.5, 0.0], [0.0, 1.0]])

    const = parse_family_spec(f"constant({b})", None)
    assert np.allclose(const.basis(9), [[0.5, 0.0], [0.0, 1.0]])
    assert np.allclose(parse_family_spec("constant", Z2).basis(3), np.eye(2))


def test_family_spec_errors():
    with pytest.raises(ParseError):
        parse_family_spec("spiral(1)", Z2)
    with pytest.raises(ParseError):
        parse_family_spec("perturb-all(0.3)", Z2)
    with pytest.raises(ParseError):
        parse_family_spec("scale-one-axis(1", Z2)
    with pytest.raises(MissingTarget):
        parse_family_spec("scale-one-axis(1)", None)


# --- JSON -----------------------------------------------------------------

def test_dumps_fixed_prints_seventeen_digits():
    assert dumps_fixed({"a": 0.1}) == '{\n  "a": 0.10000000000000001\n}\n'
    assert json.loads(dumps_fixed({"a": 0.1}))["a"] == 0.1


def test_dumps_fixed_values():
    text = dumps_fixed({"flag": True, "none": None, "n": np.int64(3), "row": np.array([0.5, 2.0]),
                        "nested": [[1.0, 2.0], []], "inf": float("inf")})
    data = json.loads(text)
    assert data == {"flag": True, "none": None, "n": 3, "row": [0.5, 2.0],
                    "nested": [[1.0, 2.0], []], "inf": None}
    assert '"row": [0.5, 2]' in text


def test_dumps_fixed_rejects_unknown_types():
    with pytest.raises(TypeError):
        dumps_fixed({"x": object()})


def test_cell_record_field_order():
    cell = realize_cell(Z2)
    record = cell_record(cell, radii(Z2, cell), cell_volume(cell))
    assert list(record)[:7] == ["n", "cutoff_radius", "halfspaces", "vertices", "packing", "covering", "volume"]
    data = json.loads(dumps_fixed(record))
    assert len(data["halfspaces"]) == 4
    assert all(h["b"] == 1.0 for h in data["halfspaces"])
    assert data["volume"] == pytest.approx(1.0)


def test_radii_record():
    record = radii_record(Z2, radii(Z2), shortest_vector(Z2))
    assert record["shortest"]["coeffs"] == [0, 1]
    assert record["det"] == pytest.approx(1.0)


def test_vertices_csv():
    lines = vertices_csv(realize_cell(Z2)).splitlines()
    assert lines[0] == "x1,x2"
    assert lines[1:] == ["-0.5,-0.5", "-0.5,0.5", "0.5,-0.5", "0.5,0.5"]


def test_convergence_and_limit_records():
    seq = family_sequence(scale_one_axis(Z2), Z2)
    report = check_convergence(seq, k_max=10, coeff_range=1)
    data = json.loads(dumps_fixed(convergence_record(report, seq)))
    assert data["verdict"] == report.verdict
    assert len(data["basis_residuals"]) == 10
    assert "CONVERGENCE" in convergence_summary(report, seq)

    limits = estimate_limit_sets(seq, n_samples=50, window=(1, 8))
    record = limit_record(limits)
    assert [h["k"] for h in record["hausdorff"]] == list(range(1, 9))
    assert len(record["points"]) == 50
    csv = hausdorff_csv(limits).splitlines()
    assert csv[0] == "k,d_H"
    assert len(csv) == 9


def test_cell_summary_mentions_counts():
    cell = realize_cell(Z2)
    text = cell_summary(cell, radii(Z2, cell), cell_volume(cell))
    assert "VORONOI CELL SUMMARY" in text


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
