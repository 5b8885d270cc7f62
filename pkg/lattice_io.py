#!/usr/bin/env python3
"""
Lattice I/O
Lattice text files, family specs, and JSON / CSV / text emitters for cells and reports
"""

import json
import math
import re
from pathlib import Path
from typing import Callable, Dict, Optional

import numpy as np

from convergence import (
    ConvergenceReport,
    LatticeSequence,
    MissingTarget,
    alternate,
    constant,
    family_sequence,
    perturb_all,
    perturb_entry,
    scale_one_axis,
)
from lattice_config import DEFAULT_TOLERANCES
from lattice_core import Lattice, LatticeError, LatticeVector, make_lattice
from limit_sets import LimitReport
from voronoi_cell import CellRadii, VolumeEstimate, VoronoiCell

FLOAT_FORMAT = ".17g"

FAMILY_IDS = ("scale-one-axis", "perturb-all", "perturb-entry", "alternate", "constant")


class ParseError(LatticeError):
    def __init__(self, message: str, line: int, column: int, source: str = "<string>"):
        super().__init__(f"{source}:{line}:{column}: {message}")
        self.line = line
        self.column = column
        self.source = source


# ---------------------------------------------------------------------------
# Lattice text format
# ---------------------------------------------------------------------------

def _significant_lines(text: str):
    """(line number, content without comment) for every non-blank line"""
    for number, raw in enumerate(text.splitlines(), 1):
        content = raw.split("#", 1)[0]
        if content.strip():
            yield number, content


def _tokens(content: str):
    """(1-based column, token) pairs"""
    for match in re.finditer(r"\S+", content):
        yield match.start() + 1, match.group(0)


def parse_lattice_text(text: str, source: str = "<string>",
                       rank_tol: float = DEFAULT_TOLERANCES.rank_tol) -> Lattice:
    """Line 1: n. Next n lines: the basis rows. '#' starts a comment."""
    lines = list(_significant_lines(text))
    if not lines:
        raise ParseError("empty lattice file (expected dimension n on the first line)", 1, 1, source)

    number, content = lines[0]
    header = list(_tokens(content))
    if len(header) != 1:
        raise ParseError(f"expected a single dimension n, found {len(header)} tokens", number, 1, source)
    column, token = header[0]
    try:
        n = int(token)
    except ValueError:
        raise ParseError(f"dimension '{token}' is not an integer", number, column, source)
    if n < 1:
        raise ParseError(f"dimension must be >= 1, got {n}", number, column, source)

    rows = []
    for number, content in lines[1:n + 1]:
        tokens = list(_tokens(content))
        if len(tokens) != n:
            raise ParseError(f"expected {n} entries in basis row, found {len(tokens)}", number, 1, source)
        row = []
        for column, token in tokens:
            try:
                row.append(float(token))
            except ValueError:
                raise ParseError(f"'{token}' is not a number", number, column, source)
        rows.append(row)

    if len(rows) < n:
        last = lines[-1][0]
        raise ParseError(f"expected {n} basis rows, found {len(rows)}", last + 1, 1, source)
    if len(lines) > n + 1:
        raise ParseError("unexpected content after the last basis row", lines[n + 1][0], 1, source)

    return make_lattice(rows, rank_tol)


def parse_lattice_file(path, rank_tol: float = DEFAULT_TOLERANCES.rank_tol) -> Lattice:
    path = Path(path)
    return parse_lattice_text(path.read_text(), str(path), rank_tol)


def format_float(value: float) -> str:
    return format(float(value), FLOAT_FORMAT)


def format_lattice(lat: Lattice, comment: Optional[str] = None) -> str:
    """Lattice text format with 17 significant digits (parses back to the same basis)"""
    lines = [f"# {comment}"] if comment else []
    lines.append(str(lat.dim))
    for row in lat.basis:
        lines.append(" ".join(format_float(x) for x in row))
    return "\n".join(lines) + "\n"


def write_lattice_file(lat: Lattice, path, comment: Optional[str] = None) -> str:
    with open(path, 'w') as f:
        f.write(format_lattice(lat, comment))
    return str(path)


# ---------------------------------------------------------------------------
# Family specs
# ---------------------------------------------------------------------------

_FAMILY_RE = re.compile(r"^\s*([a-z][a-z-]*)\s*(?:\((.*)\))?\s*$")


def parse_family_spec(spec: str, target: Optional[Lattice],
                      load_lattice: Callable[[str], Lattice] = parse_lattice_file) -> LatticeSequence:
    """Build a parameterized sequence from e.g. 'scale-one-axis(1)' or 'alternate(a.txt, b.txt)'

    scale-one-axis(eps[, axis])   row `axis` of the target basis times (1 + eps/k)
    perturb-all(delta, seed)      target basis + (delta/k) G, G uniform [-1, 1] from seed
    perturb-entry(row, col, delta) entry (row, col) of the target basis + delta/k
    alternate(fileA, fileB)       A for odd k, B for even k
    constant[(file)]              the given lattice (default: the target) for every k
    """
    match = _FAMILY_RE.match(spec)
    if not match:
        raise ParseError(f"malformed family spec '{spec}'", 1, 1, "family spec")
    rule_id, raw_args = match.group(1), match.group(2)
    args = [a.strip() for a in raw_args.split(",")] if raw_args and raw_args.strip() else []

    if rule_id not in FAMILY_IDS:
        raise ParseError(f"unknown family '{rule_id}' (known: {', '.join(FAMILY_IDS)})", 1, 1, "family spec")

    def number(index: int, cast=float):
        try:
            return cast(args[index])
        except (IndexError, ValueError):
            raise ParseError(f"{rule_id} argument {index + 1} must be a {cast.__name__}",
                             1, match.start(2) + 1 if raw_args else 1, "family spec")

    def need_target() -> Lattice:
        if target is None:
            raise MissingTarget(f"family '{rule_id}' is defined relative to a target lattice (--target)")
        return target

    if rule_id == "scale-one-axis":
        eps = number(0) if args else 1.0
        axis = number(1, int) if len(args) > 1 else 0
        rule = scale_one_axis(need_target(), eps, axis)
    elif rule_id == "perturb-all":
        rule = perturb_all(need_target(), number(0), number(1, int))
    elif rule_id == "perturb-entry":
        rule = perturb_entry(need_target(), number(0, int), number(1, int), number(2))
    elif rule_id == "alternate":
        if len(args) != 2:
            raise ParseError("alternate needs two lattice files", 1, 1, "family spec")
        rule = alternate(load_lattice(args[0]), load_lattice(args[1]), (args[0], args[1]))
    else:
        rule = constant(load_lattice(args[0]) if args else need_target())

    return family_sequence(rule, target)


# ---------------------------------------------------------------------------
# JSON with fixed float precision
# ---------------------------------------------------------------------------

def _is_container(value) -> bool:
    return isinstance(value, (dict, list, tuple, np.ndarray))


def _emit(value, indent: int, level: int) -> str:
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, dict):
        if not value:
            return "{}"
        pad = " " * (indent * (level + 1))
        items = [f"{pad}{json.dumps(str(k))}: {_emit(v, indent, level + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + " " * (indent * level) + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        if not any(_is_container(v) for v in value):
            return "[" + ", ".join(_emit(v, indent, level) for v in value) + "]"
        pad = " " * (indent * (level + 1))
        items = [pad + _emit(v, indent, level + 1) for v in value]
        return "[\n" + ",\n".join(items) + "\n" + " " * (indent * level) + "]"
    if value is None:
        return "null"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value) if math.isfinite(value) else "null"
    if isinstance(value, str):
        return json.dumps(value)
    raise TypeError(f"Cannot emit {type(value).__name__} as JSON")


def dumps_fixed(obj, indent: int = 2) -> str:
    """json.dumps equivalent printing every float with 17 significant digits"""
    return _emit(obj, indent, 0) + "\n"


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------

def vector_record(v: LatticeVector) -> Dict:
    return {"coeffs": list(v.coeffs), "v": v.point, "norm": v.norm}


def cell_record(cell: VoronoiCell, cell_radii: Optional[CellRadii] = None,
                volume: Optional[VolumeEstimate] = None) -> Dict:
    """Cell JSON in its fixed field order"""
    record = {
        "n": cell.dim,
        "cutoff_radius": cell.cutoff_radius,
        "halfspaces": [{"v": h.normal, "b": h.offset} for h in cell.halfspaces],
        "vertices": cell.vertices if cell.vertices is not None else [],
        "packing": cell_radii.packing if cell_radii else None,
        "covering": cell_radii.covering if cell_radii else None,
        "volume": volume.volume if volume else None,
    }
    if volume is not None:
        record["volume_method"] = volume.method
        record["volume_std_error"] = volume.std_error
    return record


def radii_record(lat: Lattice, cell_radii: CellRadii, shortest: LatticeVector) -> Dict:
    return {
        "n": lat.dim,
        "det": lat.det,
        "packing": cell_radii.packing,
        "covering": cell_radii.covering,
        "shortest": vector_record(shortest),
    }


def convergence_record(report: ConvergenceReport, seq: LatticeSequence) -> Dict:
    return {
        "sequence": seq.describe(),
        "k_max": report.k_max,
        "tail": list(report.tail),
        "verdict": report.verdict,
        "note": report.note,
        "assumptions": ["member bases are matched to the target basis row by row"],
        "basis_residuals": list(report.basis_residuals),
        "cassels_i": [
            {"u": list(coeffs), "residuals": list(values)}
            for coeffs, values in report.cassels_i_residuals.items()
        ],
        "cassels_ii": [
            {
                "probe": list(p.probe),
                "window": list(p.window),
                "epsilon0": p.epsilon0,
                "k0": p.k0,
                "verdict": p.verdict,
                "distances": list(p.distances),
            }
            for p in report.cassels_ii
        ],
        "uniform_radius": report.uniform_radius,
        "member_radii": list(report.member_radii),
        "radius_k0": report.radius_k0,
    }


def limit_record(report: LimitReport) -> Dict:
    return {
        "verdict": report.verdict,
        "convergence_verdict": report.convergence_verdict,
        "window": list(report.window),
        "tail": list(report.tail),
        "tail_fraction": report.tail_fraction,
        "samples": report.samples,
        "seed": report.seed,
        "interior_margin": report.interior_margin,
        "h_tol": report.h_tol,
        "confusion": report.confusion,
        "interior_misclassified": report.interior_misclassified,
        "exterior_misclassified": report.exterior_misclassified,
        "limsup_only_fraction": report.limsup_only_fraction,
        "hausdorff": [{"k": k, "d_H": d} for k, d in report.hausdorff],
        "diagnostics": list(report.diagnostics),
        "points": [
            {"x": list(r.x), "class": r.point_class, "target_class": r.target_class}
            for r in report.records
        ],
    }


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def hausdorff_csv(report: LimitReport) -> str:
    lines = ["k,d_H"] + [f"{k},{format_float(d)}" for k, d in report.hausdorff]
    return "\n".join(lines) + "\n"


def residuals_csv(report: ConvergenceReport) -> str:
    lines = ["k,basis_residual,R_k"]
    for k, (res, radius) in enumerate(zip(report.basis_residuals, report.member_radii), 1):
        lines.append(f"{k},{format_float(res)},{format_float(radius)}")
    return "\n".join(lines) + "\n"


def vertices_csv(cell: VoronoiCell) -> str:
    header = ",".join(f"x{i + 1}" for i in range(cell.dim))
    rows = [",".join(format_float(x) for x in vertex) for vertex in (cell.vertices if cell.vertices is not None else [])]
    return "\n".join([header] + rows) + "\n"


# ---------------------------------------------------------------------------
# Text summaries
# ---------------------------------------------------------------------------

def cell_summary(cell: VoronoiCell, cell_radii: CellRadii, volume: VolumeEstimate) -> str:
    summary = []
    summary.append("🔷 VORONOI CELL SUMMARY")
    summary.append("=" * 50)
    summary.append(f"Dimension: {cell.dim}")
    summary.append(f"Cutoff radius R: {cell.cutoff_radius:.6g}")
    summary.append(f"Facets: {len(cell)}")
    summary.append(f"Vertices: {len(cell.vertices) if cell.vertices is not None else 0}")
    summary.append("")
    summary.append("📐 RADII:")
    summary.append(f"  • packing  ρ = {cell_radii.packing:.10g}")
    summary.append(f"  • covering μ = {cell_radii.covering:.10g}")
    summary.append("")
    summary.append(f"📦 VOLUME ({volume.method}): {volume.volume:.10g}"
                   + (f" ± {volume.std_error:.3g}" if volume.method == "mc" else ""))
    summary.append(f"   det(L) = {cell.lattice.det:.10g}")
    summary.append("")
    summary.append("🧭 FACET VECTORS:")
    for h in cell.halfspaces:
        summary.append(f"  • {h.source.coeffs}  |v| = {h.source.norm:.6g}")
    return "\n".join(summary) + "\n"


def radii_summary(lat: Lattice, cell_radii: CellRadii, shortest: LatticeVector) -> str:
    summary = []
    summary.append("📐 LATTICE RADII")
    summary.append("=" * 50)
    summary.append(f"Dimension: {lat.dim}")
    summary.append(f"Determinant: {lat.det:.10g}")
    summary.append(f"Shortest vector: {shortest.coeffs} (norm {shortest.norm:.10g})")
    summary.append(f"Packing radius: {cell_radii.packing:.10g}")
    summary.append(f"Covering radius: {cell_radii.covering:.10g}")
    return "\n".join(summary) + "\n"


def convergence_summary(report: ConvergenceReport, seq: LatticeSequence) -> str:
    summary = []
    summary.append("📈 CONVERGENCE REPORT")
    summary.append("=" * 50)
    summary.append(f"Sequence: {seq.describe()}")
    summary.append(f"Examined k = 1..{report.k_max}, tail {report.tail[0]}..{report.tail[1]}")
    summary.append(f"Verdict: {report.verdict.upper()} ({report.note})")
    summary.append("")
    summary.append(f"  • basis residual at k_max: {report.basis_residuals[-1]:.6g} "
                   f"({'vanishing' if report.basis_tail_vanishes else 'not vanishing'})")
    summary.append(f"  • Cassels (i): {'ok' if report.cassels_i_ok else 'FAILED'} "
                   f"over {len(report.cassels_i_residuals)} target points")
    summary.append(f"  • Cassels (ii): {'ok' if report.cassels_ii_ok else 'FAILED'}")
    for p in report.cassels_ii:
        mark = "✅" if p.verdict else "❌"
        summary.append(f"      {mark} probe {p.probe}: ε0 = {p.epsilon0:.6g}, k0 = {p.k0}")
    summary.append(f"  • uniform radius R' = {report.uniform_radius:.6g} (R_k <= 2R from k0 = {report.radius_k0})")
    return "\n".join(summary) + "\n"


def limit_summary(report: LimitReport) -> str:
    summary = []
    summary.append("🎯 LIMIT SET REPORT")
    summary.append("=" * 50)
    summary.append(f"Window: {report.window[0]}..{report.window[1]}, tail {report.tail[0]}..{report.tail[1]}")
    summary.append(f"Samples: {report.samples} (seed {report.seed})")
    summary.append(f"Verdict: {report.verdict} (convergence: {report.convergence_verdict})")
    summary.append("")
    summary.append("📊 CONFUSION (target class → point class):")
    for target_class, row in report.confusion.items():
        cells = ", ".join(f"{k}={v}" for k, v in row.items())
        summary.append(f"  • {target_class:9s} {cells}")
    summary.append("")
    summary.append(f"Interior misclassified: {report.interior_misclassified}/{report.interior_total}")
    summary.append(f"Exterior misclassified: {report.exterior_misclassified}/{report.exterior_total}")
    summary.append(f"limsup-only fraction: {report.limsup_only_fraction:.4f}")
    if report.hausdorff:
        k, d = report.hausdorff[-1]
        summary.append(f"Final Hausdorff distance d_H(k={k}) = {d:.6g} (h_tol {report.h_tol:.6g})")
    if report.diagnostics:
        summary.append("")
        summary.append("⚠️  DIAGNOSTICS:")
        for line in report.diagnostics:
            summary.append(f"  • {line}")
    return "\n".join(summary) + "\n"
