#!/usr/bin/env python3
"""
Voronoi Cell Builder
Cuts V(L) out of the halfspaces 2 v.x <= |v|^2 for lattice vectors |v| <= R,
prunes them to facets and derives vertices, radii and volume
"""

import itertools
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull

from lattice_config import DEFAULT_TOLERANCES, Tolerances
from lattice_core import (
    Lattice,
    LatticeError,
    LatticeVector,
    BudgetExceeded,
    TIE_DECIMALS,
    enumerate_in_ball,
    shortest_vector,
)
from run_log import log

# Candidate facet subsets solved per numpy batch when enumerating vertices
VERTEX_BATCH = 4096
# Monte Carlo points drawn per batch; part of the seeded stream, keep fixed
MC_BATCH = 100_000


class DegenerateLP(LatticeError):
    pass


@dataclass(frozen=True, eq=False)
class Halfspace:
    """The inequality 2 v.x <= |v|^2 for a lattice vector v"""
    normal: np.ndarray
    offset: float
    source: LatticeVector

    @classmethod
    def from_vector(cls, v: LatticeVector) -> "Halfspace":
        if v.is_zero:
            raise ValueError("The zero vector does not define a halfspace")
        return cls(normal=v.point, offset=float(v.point @ v.point), source=v)


@dataclass(frozen=True, eq=False)
class VoronoiCell:
    lattice: Lattice
    cutoff_radius: float
    halfspaces: Tuple[Halfspace, ...]
    pruned: bool = False
    vertices: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return self.lattice.dim

    @cached_property
    def normals(self) -> np.ndarray:
        return np.array([h.normal for h in self.halfspaces], dtype=float).reshape(-1, self.dim)

    @cached_property
    def A(self) -> np.ndarray:
        """Constraint matrix: row i is 2 v_i"""
        return 2.0 * self.normals

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.array([h.offset for h in self.halfspaces], dtype=float)

    @cached_property
    def facet_norms(self) -> np.ndarray:
        return np.array([h.source.norm for h in self.halfspaces], dtype=float)

    def __len__(self) -> int:
        return len(self.halfspaces)

    def __repr__(self) -> str:
        state = "pruned" if self.pruned else "unpruned"
        return f"VoronoiCell(n={self.dim}, R={self.cutoff_radius:.6g}, {len(self)} halfspaces, {state})"


@dataclass(frozen=True)
class CellRadii:
    """Inradius (packing) and circumradius (covering) of the cell"""
    packing: float
    covering: float

    def __post_init__(self):
        if not 0 < self.packing <= self.covering + 1e-9:
            raise ValueError(f"Expected 0 < packing <= covering, got {self.packing}, {self.covering}")


@dataclass(frozen=True)
class VolumeEstimate:
    volume: float
    std_error: float
    method: str
    samples: int = 0


def relevant_radius(lat: Lattice) -> float:
    """R = 2 n r: vectors longer than R never cut the cell"""
    return 2.0 * lat.dim * lat.basis_norm_max


def build_cell(lat: Lattice, cutoff_radius: Optional[float] = None,
               tolerances: Tolerances = DEFAULT_TOLERANCES) -> VoronoiCell:
    """One halfspace per nonzero lattice vector in the cutoff ball (unpruned)"""
    R = relevant_radius(lat) if cutoff_radius is None else float(cutoff_radius)
    vectors = enumerate_in_ball(lat, R, tolerances.ball_tol, tolerances.enum_budget)
    halfspaces = tuple(Halfspace.from_vector(v) for v in vectors)
    log(f"🧱 Built V_R with R={R:g}: {len(halfspaces)} halfspaces", "DEBUG")
    return VoronoiCell(lattice=lat, cutoff_radius=R, halfspaces=halfspaces)


def _points(cell: VoronoiCell, X) -> np.ndarray:
    return np.asarray(X, dtype=float).reshape(-1, cell.dim)


def contains(cell: VoronoiCell, x, tol: float = DEFAULT_TOLERANCES.member_tol) -> bool:
    """True iff 2 v.x <= |v|^2 + tol for every halfspace"""
    x = np.asarray(x, dtype=float).reshape(cell.dim)
    return bool(np.all(cell.A @ x <= cell.offsets + tol))


def contains_many(cell: VoronoiCell, X, tol: float = DEFAULT_TOLERANCES.member_tol) -> np.ndarray:
    """Vectorised contains over the rows of X"""
    X = _points(cell, X)
    return np.all(X @ cell.A.T <= cell.offsets + tol, axis=1)


def boundary_distance(cell: VoronoiCell, X) -> np.ndarray:
    """Signed distance proxy: min over halfspaces of (|v|^2 - 2 v.x) / (2 |v|)

    Positive inside (exact distance to the boundary for a pruned cell),
    negative outside (largest violated-plane distance).
    """
    X = _points(cell, X)
    slack = cell.offsets - X @ cell.A.T
    return np.min(slack / (2.0 * cell.facet_norms), axis=1)


def violating_vector(cell: VoronoiCell, x,
                     tol: float = DEFAULT_TOLERANCES.member_tol) -> Optional[LatticeVector]:
    """A lattice vector u with |x - u| < |x|, or None when x is in the cell"""
    x = np.asarray(x, dtype=float).reshape(cell.dim)
    slack = cell.offsets - cell.A @ x
    if np.all(slack >= -tol):
        return None
    return cell.halfspaces[int(np.argmin(slack / (2.0 * cell.facet_norms)))].source


def _coset_candidates(cell: VoronoiCell, tol: float) -> List[int]:
    """Indices whose vector is, with its negative, the unique shortest in v + 2L

    Only those can define facets. The zero class 2L never does.
    """
    classes: Dict[Tuple[int, ...], List[int]] = {}
    for i, h in enumerate(cell.halfspaces):
        key = tuple(c % 2 for c in h.source.coeffs)
        if any(key):
            classes.setdefault(key, []).append(i)

    candidates = []
    for members in classes.values():
        best = min(cell.halfspaces[i].source.norm for i in members)
        shortest = [i for i in members if cell.halfspaces[i].source.norm <= best + tol]
        if len(shortest) == 2:
            candidates.extend(shortest)
    return sorted(candidates)


def prune_redundant(cell: VoronoiCell, feas_tol: float = DEFAULT_TOLERANCES.feas_tol,
                    prefilter: bool = True,
                    tolerances: Tolerances = DEFAULT_TOLERANCES) -> VoronoiCell:
    """Keep only facet-defining halfspaces

    Halfspace j stays iff max 2 v_j.x over the other constraints exceeds
    |v_j|^2 + feas_tol. Touching-only halfspaces (e.g. (1, 1) for Z^2) go.
    The coset prefilter only skips LPs for halfspaces that cannot be facets.
    """
    if cell.pruned:
        return cell

    n = cell.dim
    candidates = _coset_candidates(cell, tolerances.ball_tol) if prefilter else list(range(len(cell)))
    A = cell.A[candidates]
    b = cell.offsets[candidates]
    # The cell sits inside B(0, n r); this box is strictly larger
    bound = 2.0 * relevant_radius(cell.lattice)

    kept = []
    for j, index in enumerate(candidates):
        others = np.arange(len(candidates)) != j
        res = linprog(
            -A[j],
            A_ub=A[others] if others.any() else None,
            b_ub=b[others] if others.any() else None,
            bounds=[(-bound, bound)] * n,
            method="highs",
        )
        if res.status != 0:
            raise DegenerateLP(
                f"Redundancy LP failed for v={cell.halfspaces[index].source.coeffs}: {res.message}"
            )
        if -res.fun > b[j] + feas_tol:
            kept.append(index)

    halfspaces = tuple(cell.halfspaces[i] for i in kept)
    coeff_set = {h.source.coeffs for h in halfspaces}
    if any(tuple(-c for c in h.source.coeffs) not in coeff_set for h in halfspaces):
        log("⚠️  Pruned facet set is not closed under negation; consider loosening feas_tol", "WARNING")

    log(f"✂️  Pruned {len(cell)} halfspaces to {len(halfspaces)} facets "
        f"({len(candidates)} LP checks)", "DEBUG")
    return replace(cell, halfspaces=halfspaces, pruned=True, vertices=None)


def vertices(cell: VoronoiCell, feas_tol: float = DEFAULT_TOLERANCES.feas_tol,
             vertex_tol: float = DEFAULT_TOLERANCES.vertex_tol,
             budget: Optional[int] = None) -> np.ndarray:
    """Vertices of a pruned cell, one per row, sorted lexicographically

    Every n-subset of facets is intersected; solutions that satisfy all
    constraints within feas_tol are vertices. Duplicates (non-simple
    vertices) merge within vertex_tol.
    """
    if not cell.pruned:
        raise ValueError("Vertex enumeration needs a pruned cell")
    budget = budget if budget is not None else DEFAULT_TOLERANCES.vertex_budget

    n, m = cell.dim, len(cell)
    total = math.comb(m, n)
    if total > budget:
        raise BudgetExceeded(
            f"Vertex enumeration needs {total} facet subsets (budget {budget})", total, budget
        )

    A, b = cell.A, cell.offsets
    row_scale = np.linalg.norm(A, axis=1)
    found = []
    combos = itertools.combinations(range(m), n)
    while True:
        chunk = np.array(list(itertools.islice(combos, VERTEX_BATCH)), dtype=np.int64)
        if chunk.size == 0:
            break
        As = A[chunk]
        dets = np.linalg.det(As)
        regular = np.abs(dets) > 1e-10 * np.prod(row_scale[chunk], axis=1)
        if not regular.any():
            continue
        xs = np.linalg.solve(As[regular], b[chunk][regular][..., None])[..., 0]
        feasible = np.all(xs @ A.T <= b + feas_tol, axis=1)
        found.extend(xs[feasible])

    unique: List[np.ndarray] = []
    for x in found:
        if not any(np.max(np.abs(x - u)) <= vertex_tol for u in unique):
            unique.append(x)
    unique.sort(key=lambda x: tuple(np.round(x, TIE_DECIMALS)))

    result = np.array(unique, dtype=float).reshape(-1, n)
    result.setflags(write=False)
    return result


def with_vertices(cell: VoronoiCell, tolerances: Tolerances = DEFAULT_TOLERANCES) -> VoronoiCell:
    if cell.vertices is not None:
        return cell
    verts = vertices(cell, tolerances.feas_tol, tolerances.vertex_tol, tolerances.vertex_budget)
    return replace(cell, vertices=verts)


def realize_cell(lat: Lattice, tolerances: Tolerances = DEFAULT_TOLERANCES,
                 cutoff_radius: Optional[float] = None, prefilter: bool = True) -> VoronoiCell:
    """Build, prune and attach vertices"""
    cell = build_cell(lat, cutoff_radius, tolerances)
    cell = prune_redundant(cell, tolerances.feas_tol, prefilter, tolerances)
    return with_vertices(cell, tolerances)


def radii(lat: Lattice, cell: Optional[VoronoiCell] = None,
          tolerances: Tolerances = DEFAULT_TOLERANCES) -> CellRadii:
    """Packing radius |shortest|/2 and covering radius max |vertex|"""
    packing = shortest_vector(lat, tolerances.ball_tol, tolerances.enum_budget).norm / 2.0

    if cell is None:
        cell = realize_cell(lat, tolerances)
    elif not cell.pruned:
        cell = prune_redundant(cell, tolerances.feas_tol, tolerances=tolerances)
    cell = with_vertices(cell, tolerances)

    covering = float(np.max(np.linalg.norm(cell.vertices, axis=1)))

    facet_packing = float(np.min(cell.facet_norms)) / 2.0
    if abs(facet_packing - packing) > 1e-9 * max(1.0, packing):
        log(f"⚠️  Facet inradius {facet_packing!r} differs from |shortest|/2 = {packing!r}", "WARNING")

    return CellRadii(packing=packing, covering=covering)


def cell_volume(cell: VoronoiCell, method: str = "auto", samples: int = 1_000_000,
                seed: int = 0, tolerances: Tolerances = DEFAULT_TOLERANCES) -> VolumeEstimate:
    """Exact volume from the vertex hull (n <= 3) or a seeded Monte Carlo estimate

    Monte Carlo draws uniformly from the box [-n r, n r]^n, which contains
    the cell, and reports the binomial standard error.
    """
    if method == "auto":
        method = "exact" if cell.dim <= 3 else "mc"
    if method not in ("exact", "mc"):
        raise ValueError(f"Unknown volume method '{method}' (use auto, exact or mc)")
    if not cell.pruned:
        cell = prune_redundant(cell, tolerances.feas_tol, tolerances=tolerances)

    if method == "exact":
        cell = with_vertices(cell, tolerances)
        if cell.dim == 1:
            volume = float(cell.vertices.max() - cell.vertices.min())
        else:
            volume = float(ConvexHull(cell.vertices).volume)
        return VolumeEstimate(volume=volume, std_error=0.0, method="exact")

    if samples <= 0:
        raise ValueError(f"Monte Carlo needs a positive sample count, got {samples}")
    n = cell.dim
    half = n * cell.lattice.basis_norm_max
    box_volume = (2.0 * half) ** n
    rng = np.random.default_rng(seed)

    hits = 0
    remaining = samples
    while remaining > 0:
        size = min(MC_BATCH, remaining)
        X = rng.uniform(-half, half, size=(size, n))
        hits += int(np.count_nonzero(contains_many(cell, X, tolerances.member_tol)))
        remaining -= size

    p = hits / samples
    return VolumeEstimate(
        volume=p * box_volume,
        std_error=box_volume * math.sqrt(p * (1.0 - p) / samples),
        method="mc",
        samples=samples,
    )
