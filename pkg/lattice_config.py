#!/usr/bin/env python3
"""
Tolerances and run configuration for the Voronoi lattice toolkit
One record holds every numeric threshold; the CLI and library read it from here
"""

import json
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, Optional, Tuple

ENV_ENUM_BUDGET = "LATTICE_ENUM_BUDGET"
ENV_VERTEX_BUDGET = "LATTICE_VERTEX_BUDGET"


@dataclass(frozen=True)
class Tolerances:
    """Every tolerance and budget used by the toolkit"""
    # lattice-core
    ball_tol: float = 1e-9
    rank_tol: float = 1e-10
    enum_budget: int = 2_000_000
    # voronoi-cell
    feas_tol: float = 1e-9
    vertex_tol: float = 1e-8
    member_tol: float = 1e-9
    vertex_budget: int = 200_000
    # convergence
    resid_tol: float = 1e-6
    separation_tol: float = 1e-3
    probe_margin: float = 1e-2
    decay_ratio: float = 0.75
    # limit-sets
    class_tol: float = 0.0
    interior_margin_factor: float = 0.02
    h_tol_factor: float = 0.02

    def to_dict(self) -> Dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


DEFAULT_TOLERANCES = Tolerances()

_INT_FIELDS = {"enum_budget", "vertex_budget"}


def _coerce(name: str, value) -> float:
    known = {f.name for f in fields(Tolerances)}
    if name not in known:
        raise ValueError(f"Unknown tolerance '{name}' (known: {', '.join(sorted(known))})")
    if name in _INT_FIELDS:
        number = int(float(value))
        if number <= 0:
            raise ValueError(f"Budget '{name}' must be positive, got {value}")
        return number
    number = float(value)
    if number != number:
        raise ValueError(f"Tolerance '{name}' is NaN")
    return number


def load_tolerances(config_file: Optional[str] = None,
                    overrides: Optional[Dict] = None) -> Tolerances:
    """Merge defaults, a JSON config file, budget env vars and explicit overrides"""
    values = {}

    if config_file:
        path = Path(config_file)
        with open(path) as f:
            data = json.load(f)
        # A config file may nest the record under "tolerances"
        if isinstance(data, dict) and "tolerances" in data:
            data = data["tolerances"]
        if not isinstance(data, dict):
            raise ValueError(f"Config file {path} must hold a JSON object")
        for name, value in data.items():
            values[name] = _coerce(name, value)

    env_map = {ENV_ENUM_BUDGET: "enum_budget", ENV_VERTEX_BUDGET: "vertex_budget"}
    for env_name, name in env_map.items():
        raw = os.environ.get(env_name)
        if raw:
            values[name] = _coerce(name, raw)

    for name, value in (overrides or {}).items():
        values[name] = _coerce(name, value)

    return replace(DEFAULT_TOLERANCES, **values)


def parse_override(text: str) -> Tuple[str, float]:
    """Parse a 'name=value' override as given on the command line"""
    if "=" not in text:
        raise ValueError(f"Tolerance override must look like name=value, got '{text}'")
    name, raw = text.split("=", 1)
    name = name.strip()
    return name, _coerce(name, raw.strip())


@dataclass(frozen=True)
class RunConfig:
    """One CLI invocation, fully resolved"""
    command: str
    lattice_paths: Tuple[str, ...] = ()
    family: Optional[str] = None
    target_path: Optional[str] = None
    k_max: int = 100
    seed: int = 0
    samples: int = 10_000
    window: Tuple[int, int] = (1, 200)
    tail_fraction: float = 0.25
    coeff_range: int = 2
    probes: Tuple[Tuple[float, ...], ...] = ()
    volume_method: str = "auto"
    volume_samples: int = 1_000_000
    workers: int = 1
    tolerances: Tolerances = field(default_factory=Tolerances)
    output_path: Optional[str] = None
    format: str = "json"
