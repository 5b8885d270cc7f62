#!/usr/bin/env python3
"""
Lattice Core for the Voronoi lattice toolkit
Full-rank lattice bookkeeping plus the ball / shortest / closest vector searches
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from lattice_config import DEFAULT_TOLERANCES
from run_log import log

# Norms are compared after rounding to this many decimals when breaking ties
TIE_DECIMALS = 9


class LatticeError(Exception):
    """Base class for every error raised by the toolkit"""


class NonFinite(LatticeError):
    pass


class RankDeficient(LatticeError):
    pass


class InvalidBasis(LatticeError):
    pass


class BudgetExceeded(LatticeError):
    def __init__(self, message: str, requested: int, limit: int):
        super().__init__(message)
        self.requested = requested
        self.limit = limit


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Lattice:
    """A full-rank lattice; rows of ``basis`` are the basis vectors u_1..u_n"""
    basis: np.ndarray
    gram: np.ndarray
    det: float
    basis_norm_max: float
    inverse: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dual_basis(self) -> np.ndarray:
        """Rows d_i with beta_i = <x, d_i> for x = sum beta_i u_i"""
        return self.inverse.T

    @property
    def dual_norms(self) -> np.ndarray:
        return np.linalg.norm(self.dual_basis, axis=1)

    def coefficients(self, x) -> np.ndarray:
        """Solve beta . basis = x"""
        return np.asarray(x, dtype=float) @ self.inverse

    def point(self, coeffs) -> np.ndarray:
        return np.asarray(coeffs, dtype=float) @ self.basis

    def vector(self, coeffs) -> "LatticeVector":
        return LatticeVector.from_coeffs(self, coeffs)

    def __repr__(self) -> str:
        return f"Lattice(dim={self.dim}, det={self.det:.6g}, r={self.basis_norm_max:.6g})"


@dataclass(frozen=True, eq=False)
class LatticeVector:
    """An element of a lattice: integer coefficients and their real embedding"""
    coeffs: Tuple[int, ...]
    point: np.ndarray
    norm: float

    @classmethod
    def from_coeffs(cls, lat: Lattice, coeffs) -> "LatticeVector":
        ints = tuple(int(c) for c in np.rint(np.asarray(coeffs, dtype=float)))
        point = _frozen(np.asarray(ints, dtype=float) @ lat.basis)
        return cls(coeffs=ints, point=point, norm=float(np.linalg.norm(point)))

    def __neg__(self) -> "LatticeVector":
        return LatticeVector(tuple(-c for c in self.coeffs), _frozen(-self.point), self.norm)

    @property
    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def __repr__(self) -> str:
        return f"LatticeVector(coeffs={self.coeffs}, norm={self.norm:.6g})"


def make_lattice(basis, rank_tol: float = DEFAULT_TOLERANCES.rank_tol) -> Lattice:
    """Validate a square basis and populate gram, det and r"""
    try:
        arr = np.array(basis, dtype=float)
    except (TypeError, ValueError) as e:
        raise InvalidBasis(f"Basis is not a numeric matrix: {e}") from e

    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidBasis(f"Basis must be a square n x n matrix, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise InvalidBasis("Basis must have dimension n >= 1")
    if not np.all(np.isfinite(arr)):
        raise NonFinite("Basis contains NaN or infinite entries")

    singular = np.linalg.svd(arr, compute_uv=False)
    if singular[0] == 0.0 or singular[-1] <= rank_tol * singular[0]:
        raise RankDeficient(
            f"Basis is rank deficient: smallest singular value {singular[-1]:.3e} "
            f"<= {rank_tol:g} x largest {singular[0]:.3e}"
        )

    gram = arr @ arr.T
    gram = (gram + gram.T) / 2.0
    det = float(np.prod(singular))

    gram_det = math.sqrt(max(float(np.linalg.det(gram)), 0.0))
    if abs(gram_det - det) > 1e-12 * det * max(1.0, float(np.linalg.cond(arr))):
        log(f"⚠️  Gram determinant {gram_det!r} disagrees with basis determinant {det!r}", "WARNING")

    return Lattice(
        basis=_frozen(arr),
        gram=_frozen(gram),
        det=det,
        basis_norm_max=float(np.max(np.linalg.norm(arr, axis=1))),
        inverse=_frozen(np.linalg.inv(arr)),
    )


def fundamental_volume(lat: Lattice) -> float:
    """Volume of the fundamental parallelepiped, |det(basis)|"""
    return float(abs(np.linalg.det(lat.basis)))


def _as_point(lat: Lattice, x) -> np.ndarray:
    arr = np.asarray(x, dtype=float).reshape(-1)
    if arr.shape[0] != lat.dim:
        raise InvalidBasis(f"Point has dimension {arr.shape[0]}, lattice has {lat.dim}")
    if not np.all(np.isfinite(arr)):
        raise NonFinite(f"Point {x!r} has NaN or infinite coordinates")
    return arr


def _coefficient_grid(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    ranges = [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*ranges, indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, len(ranges))


def _box_size(lo: np.ndarray, hi: np.ndarray) -> int:
    size = 1
    for a, b in zip(lo, hi):
        size *= max(int(b) - int(a) + 1, 0)
    return size


def _lex_order(coeffs: np.ndarray, norms: Optional[np.ndarray] = None) -> np.ndarray:
    """Indices sorting by (rounded norm, lexicographic coefficients)"""
    keys = [coeffs[:, i] for i in reversed(range(coeffs.shape[1]))]
    if norms is not None:
        keys.append(np.round(norms, TIE_DECIMALS))
    return np.lexsort(keys)


def decompose_fundamental(lat: Lattice, x) -> Tuple[LatticeVector, np.ndarray]:
    """Write x = v + y with v in the lattice and y in the fundamental parallelepiped"""
    x = _as_point(lat, x)
    beta = lat.coefficients(x)
    floors = np.floor(beta)
    frac = beta - floors

    # beta slightly below an integer can round to a fractional part of exactly 1
    carry = frac >= 1.0
    floors[carry] += 1.0
    frac[carry] = 0.0

    v = lat.vector(floors)
    return v, frac @ lat.basis


def enumerate_in_ball(lat: Lattice, R: float,
                      ball_tol: float = DEFAULT_TOLERANCES.ball_tol,
                      budget: Optional[int] = None) -> List[LatticeVector]:
    """All nonzero lattice vectors with norm <= R + ball_tol

    Coefficient-box enumeration: for x = sum beta_i u_i we have
    |beta_i| = |<x, d_i>| <= ||x|| ||d_i||, with d_i the dual basis rows, so the
    box |alpha_i| <= (R + ball_tol) ||d_i|| holds every vector of the ball.
    Output is sorted by (norm, coefficients) and closed under negation.
    """
    if not R > 0:
        raise ValueError(f"Ball radius must be positive, got {R!r}")
    budget = budget if budget is not None else DEFAULT_TOLERANCES.enum_budget

    radius = R + ball_tol
    bounds = np.floor(radius * lat.dual_norms + 1e-9).astype(np.int64)
    requested = _box_size(-bounds, bounds)
    if requested > budget:
        raise BudgetExceeded(
            f"Ball of radius {R:g} needs {requested} candidates (budget {budget})",
            requested, budget,
        )

    n = lat.dim
    basis = np.asarray(lat.basis)
    first = np.arange(-bounds[0], bounds[0] + 1, dtype=np.int64)
    if n > 1:
        rest = _coefficient_grid(-bounds[1:], bounds[1:])
        rest_points = rest @ basis[1:]
    else:
        rest = np.zeros((1, 0), dtype=np.int64)
        rest_points = np.zeros((1, 1))

    found = []
    limit = radius * radius
    # One slab per value of the first coefficient keeps memory bounded
    for a in first:
        pts = a * basis[0] + rest_points
        mask = np.einsum("ij,ij->i", pts, pts) <= limit
        if np.any(mask):
            slab = np.column_stack([np.full(int(mask.sum()), a, dtype=np.int64), rest[mask]])
            found.append(slab)

    coeffs = np.concatenate(found) if found else np.zeros((0, n), dtype=np.int64)
    coeffs = coeffs[np.any(coeffs != 0, axis=1)]
    points = coeffs.astype(float) @ basis
    norms = np.linalg.norm(points, axis=1)
    order = _lex_order(coeffs, norms)

    log(f"🔍 Enumerated {len(order)} lattice vectors in ball of radius {R:g} "
        f"({requested} candidates)", "DEBUG")
    return [
        LatticeVector(tuple(int(c) for c in coeffs[i]), _frozen(points[i]), float(norms[i]))
        for i in order
    ]


def _leading_positive(coeffs: Sequence[int]) -> bool:
    for c in coeffs:
        if c != 0:
            return c > 0
    return False


def shortest_vector(lat: Lattice,
                    ball_tol: float = DEFAULT_TOLERANCES.ball_tol,
                    budget: Optional[int] = None) -> LatticeVector:
    """A nonzero vector of minimal norm

    Ties (always at least the pair +-v) resolve to the sign with a positive
    leading coefficient, then to the lexicographically smallest coefficients.
    The sign rule is deliberate. Plain lexicographic order would pick
    coefficients (-1, 0) for both the hexagonal basis and diag(3, 5), i.e. the
    point (-3, 0) for the latter. Here those give (0, 1) and the point (3, 0).
    """
    # Every basis vector lies in this ball, so it is never empty
    candidates = enumerate_in_ball(lat, lat.basis_norm_max, ball_tol, budget)
    best = candidates[0].norm
    tied = [v for v in candidates if v.norm <= best + ball_tol]
    canonical = [v for v in tied if _leading_positive(v.coeffs)]
    return min(canonical, key=lambda v: v.coeffs)


def closest_vector(lat: Lattice, x,
                   ball_tol: float = DEFAULT_TOLERANCES.ball_tol,
                   budget: Optional[int] = None) -> Tuple[LatticeVector, float]:
    """Nearest lattice vector to x and its distance

    Starts from the rounded coefficients c = round(beta). The distance
    rho = ||x - c.basis|| bounds the true minimum, and any lattice point within
    rho of x has |alpha_i - beta_i| <= rho ||d_i||, so searching that box is
    exact. Equidistant candidates resolve to the smallest coefficients.
    """
    x = _as_point(lat, x)
    budget = budget if budget is not None else DEFAULT_TOLERANCES.enum_budget

    beta = lat.coefficients(x)
    start = np.rint(beta)
    rho = float(np.linalg.norm(x - start @ lat.basis))

    reach = (rho + ball_tol) * lat.dual_norms
    lo = np.ceil(beta - reach - 1e-12).astype(np.int64)
    hi = np.floor(beta + reach + 1e-12).astype(np.int64)
    requested = _box_size(lo, hi)
    if requested > budget:
        raise BudgetExceeded(
            f"Closest-vector search needs {requested} candidates (budget {budget})",
            requested, budget,
        )

    grid = _coefficient_grid(lo, hi)
    dists = np.linalg.norm(x - grid.astype(float) @ lat.basis, axis=1)
    best = float(dists.min())
    tied = grid[dists <= best + ball_tol]
    winner = tied[_lex_order(tied)[0]]

    v = lat.vector(winner)
    return v, float(np.linalg.norm(x - v.point))
