#!/usr/bin/env python3
"""
Tests for Voronoi cell construction, pruning, vertices, radii and volume
"""

import math
from types import SimpleNamespace

import numpy as np
import pytest

import voronoi_cell
from lattice_config import Tolerances
from lattice_core import BudgetExceeded, closest_vector, enumerate_in_ball, make_lattice
from voronoi_cell import (
    CellRadii,
    DegenerateLP,
    boundary_distance,
    build_cell,
    cell_volume,
    contains,
    contains_many,
    prune_redundant,
    radii,
    realize_cell,
    relevant_radius,
    vertices,
    violating_vector,
)

Z1 = make_lattice([[1.0]])
Z2 = make_lattice(np.eye(2))
Z3 = make_lattice(np.eye(3))
HEX = make_lattice([[1.0, 0.0], [0.5, math.sqrt(3) / 2]])
RECT = make_lattice([[3.0, 0.0], [0.0, 5.0]])


def random_lattice(n, seed, spread=0.3):
    rng = np.random.default_rng(seed)
    return make_lattice(np.eye(n) + spread * rng.uniform(-1, 1, (n, n)))


def facet_coeffs(cell):
    return sorted(h.source.coeffs for h in cell.halfspaces)


def oracle_contains(lat, X, R, tol=1e-9, chunk=500):
    """Membership against every lattice vector within R (chunked over points)"""
    V = np.array([v.point for v in enumerate_in_ball(lat, R)])
    sq = np.einsum("ij,ij->i", V, V)
    out = []
    for start in range(0, len(X), chunk):
        block = X[start:start + chunk]
        out.append(np.all(2.0 * block @ V.T <= sq + tol, axis=1))
    return np.concatenate(out)


# --- build_cell -----------------------------------------------------------

def test_relevant_radius():
    assert relevant_radius(Z1) == pytest.approx(2.0)
    assert relevant_radius(Z2) == pytest.approx(4.0)
    assert relevant_radius(HEX) == pytest.approx(4.0)
    assert relevant_radius(RECT) == pytest.approx(20.0)


def test_square_lattice_unpruned_cell():
    cell = build_cell(Z2)
    assert cell.cutoff_radius == pytest.approx(4.0)
    assert len(cell) == 48
    assert not cell.pruned
    for h in cell.halfspaces:
        assert h.offset == pytest.approx(h.normal @ h.normal)


def test_one_dimensional_cell():
    cell = build_cell(Z1)
    assert facet_coeffs(cell) == [(-2,), (-1,), (1,), (2,)]
    assert contains(cell, [0.5])
    assert not contains(cell, [0.5000001])
    assert not contains(cell, [-0.6])


def test_contains_square_lattice():
    cell = build_cell(Z2)
    assert contains(cell, [0.5, 0.5])
    assert contains(cell, [0.0, 0.0])
    assert not contains(cell, [0.6, 0.0])
    assert list(contains_many(cell, [[0.1, -0.2], [0.7, 0.7], [-0.5, 0.0]])) == [True, False, True]


def test_boundary_distance_and_witness():
    cell = prune_redundant(build_cell(Z2))
    d = boundary_distance(cell, [[0.0, 0.0], [0.6, 0.0]])
    assert d[0] == pytest.approx(0.5)
    assert d[1] == pytest.approx(-0.1)
    assert violating_vector(cell, [0.7, 0.0]).coeffs == (1, 0)
    assert violating_vector(cell, [0.2, 0.3]) is None


# --- prune_redundant ------------------------------------------------------

def test_prune_square_lattice():
    cell = prune_redundant(build_cell(Z2))
    assert cell.pruned
    assert facet_coeffs(cell) == [(-1, 0), (0, -1), (0, 1), (1, 0)]


def test_prune_hexagonal_lattice():
    cell = prune_redundant(build_cell(HEX))
    assert len(cell) == 6
    assert all(h.source.norm == pytest.approx(1.0) for h in cell.halfspaces)


def test_prune_one_dimensional():
    assert facet_coeffs(prune_redundant(build_cell(Z1))) == [(-1,), (1,)]


@pytest.mark.parametrize("lat", [Z2, HEX, RECT, random_lattice(2, 31), random_lattice(3, 32)])
def test_prefilter_agrees_with_exhaustive_pruning(lat):
    cell = build_cell(lat)
    assert facet_coeffs(prune_redundant(cell)) == facet_coeffs(prune_redundant(cell, prefilter=False))


def test_pruned_facets_closed_under_negation():
    for seed in range(5):
        coeffs = set(facet_coeffs(prune_redundant(build_cell(random_lattice(3, seed)))))
        assert coeffs == {tuple(-c for c in v) for v in coeffs}
        assert len(coeffs) <= 2 * (2 ** 3 - 1)


def test_failed_lp_raises_degenerate(monkeypatch):
    def broken(*args, **kwargs):
        return SimpleNamespace(status=2, message="infeasible", fun=0.0)

    monkeypatch.setattr(voronoi_cell, "linprog", broken)
    with pytest.raises(DegenerateLP):
        prune_redundant(build_cell(Z2))


# --- vertices -------------------------------------------------------------

def test_square_lattice_vertices():
    verts = vertices(prune_redundant(build_cell(Z2)))
    assert np.allclose(verts, [[-0.5, -0.5], [-0.5, 0.5], [0.5, -0.5], [0.5, 0.5]])


def test_hexagonal_vertices():
    verts = vertices(prune_redundant(build_cell(HEX)))
    assert len(verts) == 6
    assert np.allclose(np.linalg.norm(verts, axis=1), 1 / math.sqrt(3))


def test_cube_vertices():
    verts = vertices(prune_redundant(build_cell(Z3)))
    assert len(verts) == 8
    assert np.allclose(np.abs(verts), 0.5)


def test_vertices_need_pruned_cell():
    with pytest.raises(ValueError):
        vertices(build_cell(Z2))


def test_vertex_budget():
    with pytest.raises(BudgetExceeded):
        vertices(prune_redundant(build_cell(HEX)), budget=3)


# --- radii ----------------------------------------------------------------

def test_radii_cube():
    r = radii(Z3)
    assert r.packing == pytest.approx(0.5)
    assert r.covering == pytest.approx(math.sqrt(3) / 2)


def test_radii_hexagonal():
    r = radii(HEX)
    assert r.packing == pytest.approx(0.5)
    assert r.covering == pytest.approx(1 / math.sqrt(3))


def test_radii_rectangular():
    r = radii(RECT)
    assert r.packing == pytest.approx(1.5)
    assert r.covering == pytest.approx(math.sqrt(1.5 ** 2 + 2.5 ** 2))


def test_radii_validation():
    with pytest.raises(ValueError):
        CellRadii(packing=1.0, covering=0.5)


@pytest.mark.parametrize("seed", range(4))
def test_packing_matches_facet_inradius_and_covering_bounds_distance(seed):
    lat = random_lattice(2, 40 + seed)
    cell = realize_cell(lat)
    r = radii(lat, cell)
    assert r.packing == pytest.approx(cell.facet_norms.min() / 2, abs=1e-12)
    rng = np.random.default_rng(seed)
    for x in rng.uniform(-3, 3, (100, 2)):
        assert closest_vector(lat, x)[1] <= r.covering + 1e-9


# --- volume ---------------------------------------------------------------

def test_exact_volume_known_lattices():
    assert cell_volume(realize_cell(Z1)).volume == pytest.approx(1.0)
    assert cell_volume(realize_cell(Z2)).volume == pytest.approx(1.0)
    assert cell_volume(realize_cell(HEX)).volume == pytest.approx(math.sqrt(3) / 2)
    assert cell_volume(realize_cell(Z3)).volume == pytest.approx(1.0)


@pytest.mark.parametrize("n,seed", [(2, s) for s in range(10)] + [(3, s) for s in range(10)])
def test_exact_volume_equals_determinant(n, seed):
    lat = random_lattice(n, 100 + seed)
    estimate = cell_volume(realize_cell(lat), method="exact")
    assert estimate.method == "exact"
    assert estimate.volume == pytest.approx(lat.det, rel=1e-9)


def test_monte_carlo_volume():
    lat = random_lattice(2, 7)
    estimate = cell_volume(realize_cell(lat), method="mc", samples=1_000_000, seed=3)
    assert estimate.method == "mc"
    assert estimate.samples == 1_000_000
    assert estimate.std_error > 0
    assert abs(estimate.volume - lat.det) <= 3 * estimate.std_error


def test_monte_carlo_is_seeded():
    cell = realize_cell(HEX)
    a = cell_volume(cell, method="mc", samples=50_000, seed=9)
    b = cell_volume(cell, method="mc", samples=50_000, seed=9)
    assert a == b


def test_unknown_volume_method():
    with pytest.raises(ValueError):
        cell_volume(realize_cell(Z2), method="simplex")


# --- geometric properties -------------------------------------------------

@pytest.mark.parametrize("n,seed", [(2, s) for s in range(10)] + [(3, s) for s in range(10)])
def test_finite_description_matches_larger_ball(n, seed):
    lat = random_lattice(n, 200 + seed, spread=0.3 if n == 2 else 0.15)
    cell = build_cell(lat)
    half = 1.2 * n * lat.basis_norm_max
    X = np.random.default_rng(seed).uniform(-half, half, (10_000, n))
    expected = oracle_contains(lat, X, 2 * cell.cutoff_radius)
    assert np.array_equal(contains_many(cell, X), expected)


@pytest.mark.parametrize("n,seed", [(2, 1), (2, 2), (3, 3)])
def test_cell_is_bounded(n, seed):
    lat = random_lattice(n, seed)
    verts = realize_cell(lat).vertices
    assert np.all(np.linalg.norm(verts, axis=1) <= n * lat.basis_norm_max + 1e-9)


def test_central_symmetry():
    cell = realize_cell(random_lattice(3, 12))
    X = np.random.default_rng(1).uniform(-1.5, 1.5, (5000, 3))
    assert np.array_equal(contains_many(cell, X), contains_many(cell, -X))


@pytest.mark.parametrize("n,seed", [(2, 50), (2, 51), (3, 52)])
def test_translates_tile_space(n, seed):
    lat = random_lattice(n, seed)
    cell = realize_cell(lat)
    X = np.random.default_rng(seed).uniform(-5, 5, (10_000, n))
    nearest = np.array([closest_vector(lat, x)[0].point for x in X])
    assert contains_many(cell, X - nearest).all()


@pytest.mark.parametrize("c", [0.5, 2.5])
def test_scaling_scales_facets_and_vertices(c):
    lat = random_lattice(2, 60)
    base = realize_cell(lat)
    scaled = realize_cell(make_lattice(c * np.asarray(lat.basis)))
    assert facet_coeffs(scaled) == facet_coeffs(base)
    assert np.allclose(scaled.vertices, c * base.vertices)


def test_tolerances_flow_through_realize_cell():
    with pytest.raises(BudgetExceeded):
        realize_cell(Z2, Tolerances(enum_budget=10))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
