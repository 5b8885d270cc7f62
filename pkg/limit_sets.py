#!/usr/bin/env python3
"""
Limit Sets of Voronoi Cell Sequences
Per-point membership traces over k, finite-window liminf / limsup
classification, Hausdorff trajectories and the pass/fail harness for
closure(liminf V(L_k)) = closure(limsup V(L_k)) = V(L)
"""

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from convergence import LatticeSequence, k_values, require_target, check_convergence
from lattice_config import DEFAULT_TOLERANCES, Tolerances
from lattice_core import Lattice
from run_log import log
from voronoi_cell import (
    VoronoiCell,
    boundary_distance,
    contains,
    contains_many,
    radii,
    realize_cell,
    violating_vector,
    with_vertices,
)

LIMINF_MEMBER = "liminf-member"
LIMSUP_ONLY = "limsup-only"
OUTSIDE = "outside"
POINT_CLASSES = (LIMINF_MEMBER, LIMSUP_ONLY, OUTSIDE)

INTERIOR = "interior"
BOUNDARY = "boundary"
EXTERIOR = "exterior"
TARGET_CLASSES = (INTERIOR, BOUNDARY, EXTERIOR)

PASS = "PASS"
FAIL = "FAIL"

# Samples whose witnesses are listed in the diagnostics of a failed run
MAX_DIAGNOSTIC_POINTS = 5


@dataclass(frozen=True)
class MembershipTrace:
    point: Tuple[float, ...]
    window: Tuple[int, int]
    bits: Tuple[bool, ...]

    def __post_init__(self):
        k_lo, k_hi = self.window
        if len(self.bits) != k_hi - k_lo + 1:
            raise ValueError(f"Trace has {len(self.bits)} bits for window {k_lo}:{k_hi}")

    def bit(self, k: int) -> bool:
        return self.bits[k - self.window[0]]


@dataclass(frozen=True)
class PointRecord:
    x: Tuple[float, ...]
    point_class: str
    target_class: str


@dataclass(frozen=True)
class LimitReport:
    window: Tuple[int, int]
    tail: Tuple[int, int]
    tail_fraction: float
    samples: int
    seed: int
    interior_margin: float
    h_tol: float
    records: Tuple[PointRecord, ...]
    confusion: Dict[str, Dict[str, int]]
    interior_total: int
    interior_misclassified: int
    exterior_total: int
    exterior_misclassified: int
    limsup_only_fraction: float
    hausdorff: Tuple[Tuple[int, float], ...]
    verdict: Optional[str] = None
    convergence_verdict: Optional[str] = None
    diagnostics: Tuple[str, ...] = ()

    @property
    def interior_rate(self) -> float:
        return self.interior_misclassified / self.interior_total if self.interior_total else 0.0

    @property
    def exterior_rate(self) -> float:
        return self.exterior_misclassified / self.exterior_total if self.exterior_total else 0.0


@dataclass(frozen=True)
class LimitParams:
    n_samples: int = 10_000
    seed: int = 0
    window: Tuple[int, int] = (1, 200)
    tail_fraction: float = 0.25
    workers: int = 1


def eventually_always(bits: Sequence[bool], h: int = 0) -> bool:
    """Membership in every set from position h on (the intersection tail)"""
    tail = list(bits)[h:]
    if not tail:
        raise ValueError(f"Start {h} leaves an empty tail")
    return all(tail)


def infinitely_often(bits: Sequence[bool], h: int = 0) -> bool:
    """Membership in some set from position h on (the union tail)"""
    tail = list(bits)[h:]
    if not tail:
        raise ValueError(f"Start {h} leaves an empty tail")
    return any(tail)


def tail_length(n_bits: int, tail_fraction: float) -> int:
    if not 0 < tail_fraction <= 1:
        raise ValueError(f"tail_fraction must be in (0, 1], got {tail_fraction}")
    return min(n_bits, max(1, math.ceil(n_bits * tail_fraction - 1e-9)))


def classify_bits(bits: Sequence[bool], tail_fraction: float = 0.25) -> str:
    bits = list(bits)
    start = len(bits) - tail_length(len(bits), tail_fraction)
    if eventually_always(bits, start):
        return LIMINF_MEMBER
    if infinitely_often(bits, start):
        return LIMSUP_ONLY
    return OUTSIDE


def classify_point(trace: MembershipTrace, tail_fraction: float = 0.25) -> str:
    """liminf-member / limsup-only / outside from the last tail_fraction of the trace"""
    return classify_bits(trace.bits, tail_fraction)


def cell_trajectory(seq: LatticeSequence, window: Tuple[int, int],
                    tolerances: Tolerances = DEFAULT_TOLERANCES,
                    workers: int = 1) -> Dict[int, VoronoiCell]:
    """Pruned cell with vertices for every k in the window, built once per distinct basis"""
    ks = list(k_values(seq, window))
    lattices = [seq.lattice(k) for k in ks]

    distinct: Dict[bytes, Lattice] = {}
    for lat in lattices:
        distinct.setdefault(np.asarray(lat.basis).tobytes(), lat)

    keys = list(distinct)

    def build(key: bytes) -> VoronoiCell:
        return realize_cell(distinct[key], tolerances)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            built = list(pool.map(build, keys))
    else:
        built = [build(key) for key in keys]
    by_basis = dict(zip(keys, built))

    log(f"🧱 Realized {len(by_basis)} distinct cells for k in {window[0]}:{window[1]}", "INFO")
    return {k: by_basis[np.asarray(lat.basis).tobytes()] for k, lat in zip(ks, lattices)}


def membership_matrix(seq: LatticeSequence, X, window: Tuple[int, int],
                      cells: Optional[Dict[int, VoronoiCell]] = None,
                      tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """bits[i, j] = X[i] in V(L_k) for k = window[0] + j"""
    cells = cells if cells is not None else cell_trajectory(seq, window, tolerances)
    X = np.asarray(X, dtype=float).reshape(-1, seq.dim)
    ks = list(k_values(seq, window))
    bits = np.empty((X.shape[0], len(ks)), dtype=bool)
    for j, k in enumerate(ks):
        bits[:, j] = contains_many(cells[k], X, tolerances.member_tol)
    return bits


def membership_trace(seq: LatticeSequence, x, window: Tuple[int, int],
                     cells: Optional[Dict[int, VoronoiCell]] = None,
                     tolerances: Tolerances = DEFAULT_TOLERANCES) -> MembershipTrace:
    x = np.asarray(x, dtype=float).reshape(seq.dim)
    bits = membership_matrix(seq, x[None, :], window, cells, tolerances)[0]
    return MembershipTrace(point=tuple(float(c) for c in x), window=tuple(window),
                           bits=tuple(bool(b) for b in bits))


def point_to_cell_distance(cell: VoronoiCell, p, feas_tol: float = DEFAULT_TOLERANCES.feas_tol) -> float:
    """Euclidean distance from p to the cell

    The nearest point lies in the relative interior of some face, so it is
    the projection of p onto the affine hull of that face's active facets.
    Projecting onto every intersection of 1..n facet planes and keeping the
    feasible results gives the exact distance.
    """
    p = np.asarray(p, dtype=float).reshape(cell.dim)
    if contains(cell, p, feas_tol):
        return 0.0

    N = cell.normals
    c = cell.offsets / 2.0
    best = math.inf
    for size in range(1, cell.dim + 1):
        combos = np.array(list(itertools.combinations(range(len(cell)), size)), dtype=np.int64)
        if combos.size == 0:
            continue
        Ns = N[combos]
        G = Ns @ np.swapaxes(Ns, 1, 2)
        regular = np.abs(np.linalg.det(G)) > 1e-12 * np.prod(np.einsum("csn,csn->cs", Ns, Ns), axis=1)
        if not regular.any():
            continue
        Ns, G = Ns[regular], G[regular]
        residual = Ns @ p - c[combos[regular]]
        lam = np.linalg.solve(G, residual[..., None])[..., 0]
        proj = p - np.einsum("csn,cs->cn", Ns, lam)
        feasible = contains_many(cell, proj, feas_tol)
        if feasible.any():
            best = min(best, float(np.min(np.linalg.norm(proj[feasible] - p, axis=1))))
    return best


def hausdorff_distance(cell_a: VoronoiCell, cell_b: VoronoiCell,
                       tolerances: Tolerances = DEFAULT_TOLERANCES) -> float:
    """d_H between two pruned cells; the max over a convex body sits at a vertex"""
    if not (cell_a.pruned and cell_b.pruned):
        raise ValueError("Hausdorff distance needs pruned cells")
    if cell_a.dim != cell_b.dim:
        raise ValueError(f"Cells differ in dimension ({cell_a.dim} vs {cell_b.dim})")
    cell_a = with_vertices(cell_a, tolerances)
    cell_b = with_vertices(cell_b, tolerances)

    a_to_b = max(point_to_cell_distance(cell_b, p, tolerances.feas_tol) for p in cell_a.vertices)
    b_to_a = max(point_to_cell_distance(cell_a, q, tolerances.feas_tol) for q in cell_b.vertices)
    return max(a_to_b, b_to_a)


def sample_ball(n: int, radius: float, count: int, seed: int) -> np.ndarray:
    """Uniform samples from B(0, radius) (Gaussian direction, radius * U^(1/n))"""
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((count, n))
    directions /= np.linalg.norm(directions, axis=1)[:, None]
    lengths = radius * rng.uniform(0.0, 1.0, count) ** (1.0 / n)
    return directions * lengths[:, None]


def estimate_limit_sets(seq: LatticeSequence, target: Optional[Lattice] = None,
                        n_samples: int = 10_000, seed: int = 0,
                        window: Tuple[int, int] = (1, 200), tail_fraction: float = 0.25,
                        tolerances: Tolerances = DEFAULT_TOLERANCES,
                        cells: Optional[Dict[int, VoronoiCell]] = None,
                        workers: int = 1) -> LimitReport:
    """Classify seeded samples against the cell sequence and the target cell"""
    target = require_target(seq, target)
    if n_samples <= 0:
        raise ValueError(f"n_samples must be positive, got {n_samples}")

    target_cell = realize_cell(target, tolerances)
    covering = radii(target, target_cell, tolerances).covering
    margin = tolerances.interior_margin_factor * covering
    h_tol = tolerances.h_tol_factor * covering

    cells = cells if cells is not None else cell_trajectory(seq, window, tolerances, workers)
    X = sample_ball(seq.dim, seq.dim * target.basis_norm_max * 1.1, n_samples, seed)
    log(f"🎯 Classifying {n_samples} samples over k in {window[0]}:{window[1]}", "INFO")

    bits = membership_matrix(seq, X, window, cells, tolerances)
    tail_len = tail_length(bits.shape[1], tail_fraction)
    tail_bits = bits[:, -tail_len:]
    point_classes = np.where(
        tail_bits.all(axis=1), LIMINF_MEMBER,
        np.where(tail_bits.any(axis=1), LIMSUP_ONLY, OUTSIDE),
    )

    signed = boundary_distance(target_cell, X)
    target_classes = np.where(signed > margin, INTERIOR, np.where(signed < -margin, EXTERIOR, BOUNDARY))

    confusion = {t: {c: 0 for c in POINT_CLASSES} for t in TARGET_CLASSES}
    for t, c in zip(target_classes, point_classes):
        confusion[str(t)][str(c)] += 1

    interior_total = sum(confusion[INTERIOR].values())
    exterior_total = sum(confusion[EXTERIOR].values())
    interior_bad = interior_total - confusion[INTERIOR][LIMINF_MEMBER]
    exterior_bad = exterior_total - confusion[EXTERIOR][OUTSIDE]

    ks = list(k_values(seq, window))
    hausdorff = tuple((k, hausdorff_distance(cells[k], target_cell, tolerances)) for k in ks)

    records = tuple(
        PointRecord(tuple(float(v) for v in x), str(c), str(t))
        for x, c, t in zip(X, point_classes, target_classes)
    )

    diagnostics = []
    wrong = np.flatnonzero(
        ((target_classes == INTERIOR) & (point_classes != LIMINF_MEMBER))
        | ((target_classes == EXTERIOR) & (point_classes != OUTSIDE))
    )
    tail_ks = ks[-tail_len:]
    for i in wrong[:MAX_DIAGNOSTIC_POINTS]:
        failing = [k for k, b in zip(tail_ks, tail_bits[i]) if not b]
        if failing:
            witness = violating_vector(cells[failing[-1]], X[i], tolerances.member_tol)
            detail = f"outside V(L_{failing[-1]}), witness coeffs {witness.coeffs if witness else None}"
        else:
            detail = "inside every tail cell"
        diagnostics.append(
            f"x={tuple(round(float(v), 6) for v in X[i])} target={target_classes[i]} "
            f"class={point_classes[i]}: {detail}"
        )

    return LimitReport(
        window=tuple(window),
        tail=(tail_ks[0], tail_ks[-1]),
        tail_fraction=tail_fraction,
        samples=n_samples,
        seed=seed,
        interior_margin=margin,
        h_tol=h_tol,
        records=records,
        confusion=confusion,
        interior_total=interior_total,
        interior_misclassified=interior_bad,
        exterior_total=exterior_total,
        exterior_misclassified=exterior_bad,
        limsup_only_fraction=float(np.mean(point_classes == LIMSUP_ONLY)),
        hausdorff=hausdorff,
        diagnostics=tuple(diagnostics),
    )


def verify_main_theorem(seq: LatticeSequence, target: Optional[Lattice] = None,
                        params: LimitParams = LimitParams(),
                        convergence_verdict: Optional[str] = None,
                        tolerances: Tolerances = DEFAULT_TOLERANCES) -> LimitReport:
    """PASS iff interior/exterior misclassification <= class_tol and d_H < h_tol on the tail

    Boundary-band samples never count: only closures are constrained.
    """
    target = require_target(seq, target)
    if convergence_verdict is None:
        convergence_verdict = check_convergence(seq, params.window[1], target=target,
                                                tolerances=tolerances).verdict

    report = estimate_limit_sets(
        seq, target, params.n_samples, params.seed, params.window, params.tail_fraction,
        tolerances, workers=params.workers,
    )

    tail_h = [d for k, d in report.hausdorff if k >= report.tail[0]]
    failures = []
    if report.interior_rate > tolerances.class_tol:
        failures.append(f"interior misclassification {report.interior_misclassified}/"
                        f"{report.interior_total} exceeds class_tol {tolerances.class_tol:g}")
    if report.exterior_rate > tolerances.class_tol:
        failures.append(f"exterior misclassification {report.exterior_misclassified}/"
                        f"{report.exterior_total} exceeds class_tol {tolerances.class_tol:g}")
    if max(tail_h) >= report.h_tol:
        failures.append(f"tail Hausdorff distance reaches {max(tail_h):.6g} >= h_tol {report.h_tol:.6g}")

    verdict = FAIL if failures else PASS
    # limsup-only mass is reported but never decides the verdict on its own
    notes = (f"limsup-only mass {report.limsup_only_fraction:.4f} of samples",) \
        if report.limsup_only_fraction > 0 else ()
    diagnostics = tuple(failures) + notes + (report.diagnostics if verdict == FAIL else ())

    level = "SUCCESS" if verdict == PASS else "WARNING"
    log(f"{'✅' if verdict == PASS else '❌'} Limit-set check: {verdict} "
        f"(convergence verdict: {convergence_verdict})", level)
    return replace(report, verdict=verdict, convergence_verdict=convergence_verdict,
                   diagnostics=diagnostics)
