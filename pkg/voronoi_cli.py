#!/usr/bin/env python3
"""
Command-Line Voronoi Lattice Toolkit
cell / radii / converge / limits as reproducible batch commands

Exit codes: 0 success, 2 validation error, 3 budget or solver error.
Data goes to stdout (or --output); diagnostics go to stderr.
"""

import argparse
import sys
from functools import partial
from typing import Optional, Sequence, Tuple

from convergence import MissingTarget, ProbeInLattice, check_convergence
from lattice_config import RunConfig, load_tolerances, parse_override
from lattice_core import BudgetExceeded, InvalidBasis, NonFinite, RankDeficient, shortest_vector
from lattice_io import (
    ParseError,
    cell_record,
    cell_summary,
    convergence_record,
    convergence_summary,
    dumps_fixed,
    format_float,
    hausdorff_csv,
    limit_record,
    limit_summary,
    parse_family_spec,
    parse_lattice_file,
    radii_record,
    radii_summary,
    residuals_csv,
    vertices_csv,
)
from limit_sets import LimitParams, verify_main_theorem
from run_log import configure_run_log, log
from voronoi_cell import DegenerateLP, cell_volume, radii, realize_cell

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BUDGET = 3

VALIDATION_ERRORS = (ParseError, NonFinite, RankDeficient, InvalidBasis, MissingTarget,
                     ProbeInLattice, ValueError, IndexError, OSError)
BUDGET_ERRORS = (BudgetExceeded, DegenerateLP)


def parse_window(text: str) -> Tuple[int, int]:
    try:
        lo, hi = (int(part) for part in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must look like A:B, got '{text}'")
    if lo < 1 or hi < lo:
        raise argparse.ArgumentTypeError(f"window needs 1 <= A <= B, got {lo}:{hi}")
    return lo, hi


def parse_probe(text: str) -> Tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"probe must be comma-separated numbers, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with tolerance overrides")
    common.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE",
                        help="override one tolerance or budget (repeatable)")
    common.add_argument("--format", choices=("json", "csv", "text"), default="json")
    common.add_argument("--output", help="write data here instead of stdout")
    common.add_argument("--log-file", help="also append diagnostics to this file")
    common.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for progress, -vv for debug detail")

    parser = argparse.ArgumentParser(
        prog="voronoi_cli.py",
        description="Voronoi cells of full-rank lattices and convergence of lattice sequences",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    cell = sub.add_parser("cell", parents=[common], help="build, prune and measure V(L)")
    cell.add_argument("lattice", help="lattice text file")
    cell.add_argument("--volume-method", choices=("auto", "exact", "mc"), default="auto")
    cell.add_argument("--volume-samples", type=int, default=1_000_000)
    cell.add_argument("--seed", type=int, default=0)

    rad = sub.add_parser("radii", parents=[common], help="packing and covering radius")
    rad.add_argument("lattice", help="lattice text file")

    conv = sub.add_parser("converge", parents=[common], help="check L_k -> L")
    conv.add_argument("--family", required=True, help="family spec, e.g. 'scale-one-axis(1)'")
    conv.add_argument("--target", required=True, help="lattice text file of the declared limit")
    conv.add_argument("--kmax", type=int, default=100)
    conv.add_argument("--coeff-range", type=int, default=2)
    conv.add_argument("--probe", type=parse_probe, action="append", default=[],
                      help="non-lattice probe point 'x1,x2,...' (repeatable)")

    lim = sub.add_parser("limits", parents=[common], help="liminf / limsup of V(L_k) against V(L)")
    lim.add_argument("--family", required=True)
    lim.add_argument("--target", required=True)
    lim.add_argument("--window", type=parse_window, default=(1, 200))
    lim.add_argument("--samples", type=int, default=10_000)
    lim.add_argument("--seed", type=int, default=0)
    lim.add_argument("--tail", type=float, default=0.25, help="tail fraction of the window")
    lim.add_argument("--workers", type=int, default=1)

    return parser


def build_run_config(args: argparse.Namespace) -> RunConfig:
    overrides = dict(parse_override(text) for text in args.tol)
    tolerances = load_tolerances(args.config, overrides)
    lattice = getattr(args, "lattice", None)
    return RunConfig(
        command=args.command,
        lattice_paths=(lattice,) if lattice else (),
        family=getattr(args, "family", None),
        target_path=getattr(args, "target", None),
        k_max=getattr(args, "kmax", 100),
        seed=getattr(args, "seed", 0),
        samples=getattr(args, "samples", 10_000),
        window=getattr(args, "window", (1, 200)),
        tail_fraction=getattr(args, "tail", 0.25),
        coeff_range=getattr(args, "coeff_range", 2),
        probes=tuple(getattr(args, "probe", ())),
        volume_method=getattr(args, "volume_method", "auto"),
        volume_samples=getattr(args, "volume_samples", 1_000_000),
        workers=getattr(args, "workers", 1),
        tolerances=tolerances,
        output_path=args.output,
        format=args.format,
    )


def run_cell(cfg: RunConfig) -> str:
    """build -> prune -> vertices -> radii -> volume"""
    tol = cfg.tolerances
    lat = parse_lattice_file(cfg.lattice_paths[0], tol.rank_tol)
    log(f"🔷 Building Voronoi cell for {cfg.lattice_paths[0]} (n={lat.dim})", "INFO")

    cell = realize_cell(lat, tol)
    cell_radii = radii(lat, cell, tol)
    volume = cell_volume(cell, cfg.volume_method, cfg.volume_samples, cfg.seed, tol)
    log(f"✅ {len(cell)} facets, {len(cell.vertices)} vertices, volume {volume.volume:.10g}", "SUCCESS")

    if cfg.format == "csv":
        return vertices_csv(cell)
    if cfg.format == "text":
        return cell_summary(cell, cell_radii, volume)
    return dumps_fixed(cell_record(cell, cell_radii, volume))


def run_radii(cfg: RunConfig) -> str:
    tol = cfg.tolerances
    lat = parse_lattice_file(cfg.lattice_paths[0], tol.rank_tol)
    shortest = shortest_vector(lat, tol.ball_tol, tol.enum_budget)
    cell_radii = radii(lat, tolerances=tol)

    if cfg.format == "csv":
        return f"packing,covering\n{format_float(cell_radii.packing)},{format_float(cell_radii.covering)}\n"
    if cfg.format == "text":
        return radii_summary(lat, cell_radii, shortest)
    return dumps_fixed(radii_record(lat, cell_radii, shortest))


def _load_sequence(cfg: RunConfig):
    target = parse_lattice_file(cfg.target_path, cfg.tolerances.rank_tol)
    loader = partial(parse_lattice_file, rank_tol=cfg.tolerances.rank_tol)
    return parse_family_spec(cfg.family, target, loader), target


def run_converge(cfg: RunConfig) -> str:
    seq, target = _load_sequence(cfg)
    probes = list(cfg.probes) or None
    report = check_convergence(seq, cfg.k_max, probes, cfg.coeff_range, target, cfg.tolerances)

    if cfg.format == "csv":
        return residuals_csv(report)
    if cfg.format == "text":
        return convergence_summary(report, seq)
    return dumps_fixed(convergence_record(report, seq))


def run_limits(cfg: RunConfig) -> str:
    seq, target = _load_sequence(cfg)
    params = LimitParams(cfg.samples, cfg.seed, cfg.window, cfg.tail_fraction, cfg.workers)
    report = verify_main_theorem(seq, target, params, tolerances=cfg.tolerances)

    if cfg.format == "csv":
        return hausdorff_csv(report)
    if cfg.format == "text":
        return limit_summary(report)
    return dumps_fixed(limit_record(report))


COMMANDS = {
    "cell": run_cell,
    "radii": run_radii,
    "converge": run_converge,
    "limits": run_limits,
}


def emit(cfg: RunConfig, text: str):
    if cfg.output_path:
        with open(cfg.output_path, 'w') as f:
            f.write(text)
        log(f"📁 Wrote {cfg.command} output to: {cfg.output_path}", "INFO")
    else:
        sys.stdout.write(text)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = {0: "WARNING", 1: "INFO"}.get(args.verbose, "DEBUG")
    configure_run_log(level, args.log_file)

    try:
        cfg = build_run_config(args)
        emit(cfg, COMMANDS[cfg.command](cfg))
    except BUDGET_ERRORS as e:
        log(f"❌ {e}", "ERROR")
        return EXIT_BUDGET
    except VALIDATION_ERRORS as e:
        log(f"❌ {e}", "ERROR")
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
