#!/usr/bin/env python3
"""
Lattice Sequence Convergence
Sequences (L_k) with a declared limit L, checked by basis residuals, by the
two Cassels conditions, and by the uniform cell radius R'
"""

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from lattice_config import DEFAULT_TOLERANCES, Tolerances
from lattice_core import (
    InvalidBasis,
    Lattice,
    LatticeError,
    closest_vector,
    make_lattice,
)
from run_log import log
from voronoi_cell import relevant_radius

EXPLICIT_PREFIX = "explicit-prefix"
PARAMETERIZED_FAMILY = "parameterized-family"

CONVERGED = "converged"
NOT_CONVERGED = "not-converged"
INCONCLUSIVE = "inconclusive"

CONVERGED_NOTE = "consistent with convergence on examined data"


class MissingTarget(LatticeError):
    pass


class ProbeInLattice(LatticeError):
    pass


@dataclass(frozen=True)
class FamilyRule:
    """A deterministic rule k -> basis(k), k >= 1"""
    rule_id: str
    params: Tuple
    formula: str
    basis_fn: Callable[[int], np.ndarray] = field(repr=False, compare=False)

    def basis(self, k: int) -> np.ndarray:
        if k < 1:
            raise ValueError(f"Sequence index must be >= 1, got {k}")
        return np.asarray(self.basis_fn(k), dtype=float)

    @property
    def spec(self) -> str:
        return f"{self.rule_id}({', '.join(str(p) for p in self.params)})"


def scale_one_axis(target: Lattice, eps: float = 1.0, axis: int = 0) -> FamilyRule:
    """basis(k) = target basis with row `axis` scaled by (1 + eps/k)"""
    if not 0 <= axis < target.dim:
        raise ValueError(f"Axis {axis} out of range for dimension {target.dim}")
    base = np.array(target.basis)

    def basis_fn(k: int) -> np.ndarray:
        out = base.copy()
        out[axis] *= 1.0 + eps / k
        return out

    return FamilyRule("scale-one-axis", (eps,), f"u_{axis + 1}(k) = (1 + {eps}/k) u_{axis + 1}", basis_fn)


def perturb_all(target: Lattice, delta: float, seed: int) -> FamilyRule:
    """basis(k) = target basis + (delta/k) G, G uniform on [-1, 1] fixed by seed"""
    base = np.array(target.basis)
    G = np.random.default_rng(seed).uniform(-1.0, 1.0, size=base.shape)

    def basis_fn(k: int) -> np.ndarray:
        return base + (delta / k) * G

    return FamilyRule("perturb-all", (delta, seed), f"B(k) = B + ({delta}/k) G_seed{seed}", basis_fn)


def perturb_entry(target: Lattice, row: int, col: int, delta: float) -> FamilyRule:
    """basis(k) = target basis with entry (row, col) increased by delta/k"""
    n = target.dim
    if not (0 <= row < n and 0 <= col < n):
        raise ValueError(f"Entry ({row}, {col}) out of range for dimension {n}")
    base = np.array(target.basis)

    def basis_fn(k: int) -> np.ndarray:
        out = base.copy()
        out[row, col] += delta / k
        return out

    return FamilyRule("perturb-entry", (row, col, delta), f"B(k)[{row},{col}] = B[{row},{col}] + {delta}/k", basis_fn)


def alternate(lattice_a: Lattice, lattice_b: Lattice, labels: Tuple[str, str] = ("A", "B")) -> FamilyRule:
    """basis(k) = A for odd k, B for even k"""
    if lattice_a.dim != lattice_b.dim:
        raise InvalidBasis(f"Alternating lattices differ in dimension ({lattice_a.dim} vs {lattice_b.dim})")
    a, b = np.array(lattice_a.basis), np.array(lattice_b.basis)
    return FamilyRule("alternate", tuple(labels), f"B(k) = {labels[0]} (k odd), {labels[1]} (k even)",
                      lambda k: a if k % 2 else b)


def constant(lattice: Lattice) -> FamilyRule:
    """basis(k) = basis of the given lattice"""
    base = np.array(lattice.basis)
    return FamilyRule("constant", (), "B(k) = B", lambda k: base)


@dataclass(frozen=True, eq=False)
class LatticeSequence:
    """A finite prefix (L_1..L_K) or an index-parameterized family, plus its declared limit"""
    dim: int
    kind: str
    members: Tuple[Lattice, ...] = ()
    rule: Optional[FamilyRule] = None
    target: Optional[Lattice] = None
    _cache: Dict[int, Lattice] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind == EXPLICIT_PREFIX:
            if not self.members:
                raise ValueError("An explicit prefix needs at least one lattice")
            bad = [i + 1 for i, m in enumerate(self.members) if m.dim != self.dim]
            if bad:
                raise InvalidBasis(f"Members {bad} do not have dimension {self.dim}")
        elif self.kind == PARAMETERIZED_FAMILY:
            if self.rule is None:
                raise ValueError("A parameterized family needs a rule")
        else:
            raise ValueError(f"Unknown sequence kind '{self.kind}'")
        if self.target is not None and self.target.dim != self.dim:
            raise InvalidBasis(f"Target has dimension {self.target.dim}, sequence has {self.dim}")

    @property
    def length(self) -> Optional[int]:
        """Number of members, or None for an unbounded family"""
        return len(self.members) if self.kind == EXPLICIT_PREFIX else None

    def _check_index(self, k: int):
        if k < 1 or (self.length is not None and k > self.length):
            raise IndexError(f"Sequence index {k} outside 1..{self.length or 'inf'}")

    def basis(self, k: int) -> np.ndarray:
        self._check_index(k)
        if self.kind == EXPLICIT_PREFIX:
            return np.array(self.members[k - 1].basis)
        return self.rule.basis(k)

    def lattice(self, k: int) -> Lattice:
        """L_k, validated once and cached"""
        self._check_index(k)
        if k not in self._cache:
            if self.kind == EXPLICIT_PREFIX:
                lat = self.members[k - 1]
            else:
                lat = make_lattice(self.rule.basis(k))
                if lat.dim != self.dim:
                    raise InvalidBasis(f"basis({k}) has dimension {lat.dim}, expected {self.dim}")
            self._cache[k] = lat
        return self._cache[k]

    def describe(self) -> str:
        if self.kind == EXPLICIT_PREFIX:
            return f"explicit prefix of {len(self.members)} lattices in dimension {self.dim}"
        return f"{self.rule.spec}: {self.rule.formula}"


def explicit_sequence(lattices: Sequence[Lattice], target: Optional[Lattice] = None) -> LatticeSequence:
    lattices = tuple(lattices)
    dim = lattices[0].dim if lattices else 0
    return LatticeSequence(dim=dim, kind=EXPLICIT_PREFIX, members=lattices, target=target)


def family_sequence(rule: FamilyRule, target: Optional[Lattice], dim: Optional[int] = None) -> LatticeSequence:
    if dim is None:
        if target is None:
            dim = len(rule.basis(1))
        else:
            dim = target.dim
    return LatticeSequence(dim=dim, kind=PARAMETERIZED_FAMILY, rule=rule, target=target)


@dataclass(frozen=True)
class ProbeVerdict:
    probe: Tuple[float, ...]
    window: Tuple[int, int]
    distances: Tuple[float, ...]
    epsilon0: float
    k0: Optional[int]
    verdict: bool


@dataclass(frozen=True)
class ConvergenceReport:
    k_max: int
    tail: Tuple[int, int]
    basis_residuals: Tuple[float, ...]
    cassels_i_residuals: Dict[Tuple[int, ...], Tuple[float, ...]]
    cassels_ii: Tuple[ProbeVerdict, ...]
    uniform_radius: float
    member_radii: Tuple[float, ...]
    radius_k0: Optional[int]
    basis_tail_vanishes: bool
    cassels_i_ok: bool
    cassels_ii_ok: bool
    verdict: str
    note: str


def require_target(seq: LatticeSequence, target: Optional[Lattice] = None) -> Lattice:
    target = target if target is not None else seq.target
    if target is None:
        raise MissingTarget("This check needs a declared limit lattice (target)")
    if target.dim != seq.dim:
        raise InvalidBasis(f"Target has dimension {target.dim}, sequence has {seq.dim}")
    return target


def k_values(seq: LatticeSequence, k_range: Tuple[int, int]) -> range:
    k_lo, k_hi = k_range
    if k_lo < 1 or k_hi < k_lo:
        raise ValueError(f"Bad index window {k_lo}:{k_hi}")
    if seq.length is not None and k_hi > seq.length:
        raise IndexError(f"Window end {k_hi} exceeds sequence length {seq.length}")
    return range(k_lo, k_hi + 1)


def tail_window(k_max: int) -> Tuple[int, int]:
    """[k_max/2, k_max], the stretch on which asymptotic claims are judged"""
    return max(1, math.ceil(k_max / 2)), k_max


def tail_vanishes(values: Sequence[float], ks: Optional[Sequence[int]] = None,
                  resid_tol: float = DEFAULT_TOLERANCES.resid_tol,
                  decay_ratio: float = DEFAULT_TOLERANCES.decay_ratio) -> bool:
    """Finite proxy for values -> 0 on a tail k = ks[0]..ks[-1]

    Either every value is within resid_tol, or the tail is non-increasing
    (within resid_tol), its last value is at most decay_ratio times its first,
    and the intercept a of a least-squares fit a + b/k stays <= resid_tol.
    The fit separates 1/k from c + 1/k; decay faster than 1/k gives a < 0.
    ks defaults to 1..len(values).
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return False
    if values.max() <= resid_tol:
        return True
    nonincreasing = bool(np.all(np.diff(values) <= resid_tol))
    if not (nonincreasing and values[-1] <= decay_ratio * values[0]):
        return False

    ks = np.arange(1, values.size + 1) if ks is None else np.asarray(ks, dtype=float)
    if ks.shape != values.shape:
        raise ValueError(f"Got {ks.size} indices for {values.size} values")
    design = np.column_stack([np.ones_like(ks, dtype=float), 1.0 / ks])
    (intercept, _), *_ = np.linalg.lstsq(design, values, rcond=None)
    return float(intercept) <= resid_tol


def basis_convergence(seq: LatticeSequence, k_max: int, target: Optional[Lattice] = None) -> List[float]:
    """max_i |u_ki - u_i| for k = 1..k_max (bases matched row by row)"""
    target = require_target(seq, target)
    base = np.asarray(target.basis)
    return [
        float(np.max(np.linalg.norm(seq.basis(k) - base, axis=1)))
        for k in k_values(seq, (1, k_max))
    ]


def cassels_check_i(seq: LatticeSequence, target: Optional[Lattice] = None, coeff_range: int = 2,
                    k_range: Tuple[int, int] = (1, 100),
                    tolerances: Tolerances = DEFAULT_TOLERANCES) -> Dict[Tuple[int, ...], List[float]]:
    """d(u, L_k) for every u of the target with coefficients in [-c, c]^n"""
    target = require_target(seq, target)
    if coeff_range < 0:
        raise ValueError(f"coeff_range must be >= 0, got {coeff_range}")
    ks = k_values(seq, k_range)

    residuals: Dict[Tuple[int, ...], List[float]] = {}
    for coeffs in itertools.product(range(-coeff_range, coeff_range + 1), repeat=target.dim):
        u = target.point(coeffs)
        residuals[coeffs] = [
            closest_vector(seq.lattice(k), u, tolerances.ball_tol, tolerances.enum_budget)[1]
            for k in ks
        ]
    return residuals


def default_probes(target: Lattice) -> List[np.ndarray]:
    """Half-sums (1/2) sum e_i u_i, e in {0,1}^n nonzero

    None of them is a lattice point: |p - v| = |u - 2v|/2 >= packing radius.
    """
    probes = []
    for eps in itertools.product((0, 1), repeat=target.dim):
        if any(eps):
            probes.append(0.5 * target.point(eps))
    return probes


def cassels_check_ii(seq: LatticeSequence, target: Optional[Lattice] = None,
                     probes: Optional[Sequence] = None,
                     k_window: Tuple[int, int] = (50, 100),
                     tolerances: Tolerances = DEFAULT_TOLERANCES) -> List[ProbeVerdict]:
    """Non-lattice probes must stay separated from L_k on the window

    epsilon0 is the smallest distance seen on the window; k0 is the first k
    from which every distance stays >= separation_tol (None if the last fails).
    Without probes the half-sums of the target basis are used.
    """
    target = require_target(seq, target)
    ks = list(k_values(seq, k_window))
    probes = default_probes(target) if probes is None else probes

    verdicts = []
    for probe in probes:
        x = np.asarray(probe, dtype=float).reshape(target.dim)
        _, to_target = closest_vector(target, x, tolerances.ball_tol, tolerances.enum_budget)
        if to_target <= tolerances.probe_margin:
            raise ProbeInLattice(
                f"Probe {tuple(x.tolist())} is within {to_target:.3g} of the target lattice "
                f"(margin {tolerances.probe_margin:g})"
            )

        distances = [
            closest_vector(seq.lattice(k), x, tolerances.ball_tol, tolerances.enum_budget)[1]
            for k in ks
        ]
        k0 = None
        for k, d in zip(reversed(ks), reversed(distances)):
            if d < tolerances.separation_tol:
                break
            k0 = k

        epsilon0 = min(distances)
        verdicts.append(ProbeVerdict(
            probe=tuple(float(c) for c in x),
            window=(ks[0], ks[-1]),
            distances=tuple(distances),
            epsilon0=epsilon0,
            k0=k0,
            verdict=epsilon0 >= tolerances.separation_tol,
        ))
    return verdicts


def member_radii(seq: LatticeSequence, k_max: int) -> List[float]:
    """R_k = 2 n max_i |u_ki| for k = 1..k_max"""
    return [relevant_radius(seq.lattice(k)) for k in k_values(seq, (1, k_max))]


def uniform_cell_radius(seq: LatticeSequence, k_max: int, target: Optional[Lattice] = None) -> float:
    """R' = max(2R, max_k R_k): one cutoff valid for the target and every examined L_k"""
    target = require_target(seq, target)
    R = relevant_radius(target)
    return max(2.0 * R, max(member_radii(seq, k_max)))


def radius_settling_index(seq: LatticeSequence, k_max: int,
                          target: Optional[Lattice] = None) -> Optional[int]:
    """First k0 with R_k <= 2R for every examined k >= k0 (None if R_kmax > 2R)"""
    target = require_target(seq, target)
    bound = 2.0 * relevant_radius(target)
    k0 = None
    radii = member_radii(seq, k_max)
    for k in range(k_max, 0, -1):
        if radii[k - 1] > bound:
            break
        k0 = k
    return k0


def check_convergence(seq: LatticeSequence, k_max: int = 100, probes: Optional[Sequence] = None,
                      coeff_range: int = 2, target: Optional[Lattice] = None,
                      tolerances: Tolerances = DEFAULT_TOLERANCES) -> ConvergenceReport:
    """Run every convergence check on k = 1..k_max and assemble the verdict

    Any failed Cassels condition on the tail means not-converged. Both
    conditions holding with vanishing basis residuals means converged (in the
    sense of CONVERGED_NOTE). Cassels holding with non-vanishing basis residuals
    is inconclusive: the supplied bases may simply be badly matched.
    """
    target = require_target(seq, target)
    tail = tail_window(k_max)
    tail_slice = slice(tail[0] - 1, tail[1])
    log(f"📈 Checking convergence of {seq.describe()} for k <= {k_max}", "INFO")

    residuals = basis_convergence(seq, k_max, target)
    cassels_i = cassels_check_i(seq, target, coeff_range, (1, k_max), tolerances)
    cassels_ii = cassels_check_ii(seq, target, probes, tail, tolerances)

    tail_ks = range(tail[0], tail[1] + 1)
    basis_ok = tail_vanishes(residuals[tail_slice], tail_ks, tolerances.resid_tol, tolerances.decay_ratio)
    cassels_i_ok = all(
        tail_vanishes(values[tail_slice], tail_ks, tolerances.resid_tol, tolerances.decay_ratio)
        for values in cassels_i.values()
    )
    cassels_ii_ok = all(v.verdict for v in cassels_ii)

    if not (cassels_i_ok and cassels_ii_ok):
        verdict, note = NOT_CONVERGED, "a Cassels condition fails on the tail window"
    elif basis_ok:
        verdict, note = CONVERGED, CONVERGED_NOTE
    else:
        verdict, note = INCONCLUSIVE, "Cassels conditions hold but matched basis residuals do not vanish"

    radii = member_radii(seq, k_max)
    report = ConvergenceReport(
        k_max=k_max,
        tail=tail,
        basis_residuals=tuple(residuals),
        cassels_i_residuals={c: tuple(v) for c, v in cassels_i.items()},
        cassels_ii=tuple(cassels_ii),
        uniform_radius=max(2.0 * relevant_radius(target), max(radii)),
        member_radii=tuple(radii),
        radius_k0=radius_settling_index(seq, k_max, target),
        basis_tail_vanishes=basis_ok,
        cassels_i_ok=cassels_i_ok,
        cassels_ii_ok=cassels_ii_ok,
        verdict=verdict,
        note=note,
    )
    level = "SUCCESS" if verdict == CONVERGED else "WARNING"
    log(f"{'✅' if verdict == CONVERGED else '⚠️ '} Verdict: {verdict} ({note})", level)
    return report
