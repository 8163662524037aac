"""Command-line entry points: simulate, features, fit, rcdc, grid.

Exit status is 0 on success, 1 for invalid input or usage, 2 when a
numerical step fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import io as tio
from .features import Transform, compute_rcd
from .mechanism import (
    SweepKind,
    classify_mechanism,
    co_oxidation_rcds,
    grid_sweep_irreversible,
    grid_sweep_reversible,
    k_grid_axis,
    rcdc,
)
from .reactor import PRESETS, MechanismSpec, ReactorConfig, SimulationError, simulate_pulse
from .regress import PenaltySpec, build_design_matrix, fit, parse_terms

log = logging.getLogger("taprcdc")

MODES = ("simulate", "features", "fit", "rcdc", "grid")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Everything one run needs; the JSON config file and flags fill it in that order."""

    mode: str = "simulate"
    preset: str | None = None
    reactor: dict = field(default_factory=dict)
    mechanism: dict = field(default_factory=dict)
    penalty: dict = field(default_factory=dict)
    features: str | None = None
    flux: str | None = None
    calibration: str | None = None
    out: str | None = None
    gas: str | None = None
    method: str = "scad"
    terms: str = "full"
    folds: int = 10
    seed: int = 0
    trim: float = 0.0
    sweep: str = "lh-irrev"
    k_min: float = 0.04
    k_max: float = 1.0
    k_step: float = 0.02
    jobs: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.preset is not None and self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")
        if not 0 <= self.trim <= 0.25:
            raise ValueError("--trim must lie in [0, 0.25]")
        if self.folds < 2:
            raise ValueError("--folds must be at least 2")
        SweepKind(self.sweep)

    def reactor_config(self) -> ReactorConfig:
        return ReactorConfig(**self.reactor)

    def mechanism_spec(self) -> MechanismSpec:
        base = PRESETS[self.preset or "table2-case1"]
        if not self.mechanism:
            return base
        changes = dict(self.mechanism)
        if "kind" in changes:
            return MechanismSpec(**changes)
        return replace(base, **changes)

    def penalty_spec(self) -> PenaltySpec:
        opts = {"method": self.method, "cv_folds": self.folds, "seed": self.seed, **self.penalty}
        return PenaltySpec(**opts)


def load_run_config(path: str | Path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ValueError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ValueError(f"config file {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ValueError(f"config file {path}: top level must be an object")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValueError(f"config file {path}: unknown keys {unknown}")
    return data


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="taprcdc", description="TAP thin-zone simulation, rate-reactivity regression and RCDC analysis.")
    sub = parser.add_subparsers(dest="mode", parser_class=_Parser)
    sub.required = True

    def common(p):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", help="output path")
        p.add_argument("--seed", type=int)
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("simulate", help="simulate a preset pulse and write thin-zone features")
    common(p)
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--flux-out", help="also write the outlet fluxes")

    p = sub.add_parser("features", help="RCD series from a features file, or baseline-corrected flux")
    common(p)
    p.add_argument("--features")
    p.add_argument("--flux")
    p.add_argument("--calibration")
    p.add_argument("--preset", choices=sorted(PRESETS))

    p = sub.add_parser("fit", help="rate-reactivity regression on one gas")
    common(p)
    p.add_argument("--features")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--gas")
    p.add_argument("--method", choices=("ols", "lasso", "scad"))
    p.add_argument("--terms")
    p.add_argument("--folds", type=int)

    p = sub.add_parser("rcdc", help="RCD correlation matrix and mechanism call")
    common(p)
    p.add_argument("--features")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--trim", type=float)

    p = sub.add_parser("grid", help="correlation grid sweep")
    common(p)
    p.add_argument("--sweep", choices=[k.value for k in SweepKind])
    p.add_argument("--k-min", dest="k_min", type=float)
    p.add_argument("--k-max", dest="k_max", type=float)
    p.add_argument("--k-step", dest="k_step", type=float)
    p.add_argument("--jobs", type=int)
    return parser


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    data = load_run_config(ns.config) if getattr(ns, "config", None) else {}
    data["mode"] = ns.mode
    for f in fields(RunConfig):
        val = getattr(ns, f.name, None)
        if val is not None and f.name != "mode":
            data[f.name] = val
    return RunConfig(**data)


def _meta(cfg: RunConfig) -> dict:
    return {"config": asdict(cfg), "seed": cfg.seed}


def _features_for(cfg: RunConfig) -> dict:
    if cfg.features:
        return tio.load_features_csv(cfg.features)
    if cfg.preset:
        return simulate_pulse(cfg.reactor_config(), cfg.mechanism_spec()).features
    raise ValueError("give --features or --preset")


def _require_out(cfg: RunConfig) -> Path:
    if not cfg.out:
        raise ValueError("--out is required")
    return Path(cfg.out)


def cmd_simulate(cfg: RunConfig) -> dict:
    out = _require_out(cfg)
    if cfg.preset is None:
        cfg.preset = "table2-case1"
    config, mech = cfg.reactor_config(), cfg.mechanism_spec()
    sim = simulate_pulse(config, mech)
    meta = {
        **_meta(cfg),
        "reactor": asdict(config),
        "mechanism": {"kind": mech.kind.value, "k_forward": mech.k_forward, "k_reverse": mech.k_reverse,
                      "n_sites": mech.n_sites, "co_delay": mech.co_delay, "shared_sites": mech.shared_sites},
        "mass_balance_defect": sim.mass_balance_defect,
    }
    tio.save_features_csv(sim.features, out, meta)
    flux_out = getattr(cfg, "_flux_out", None)
    if flux_out:
        tio.save_flux_csv(tio.FluxTable(sim.t, dict(sim.outlet_flux)), flux_out, meta)
    return {"out": str(out), "gases": list(sim.features), "mass_balance_defect": sim.mass_balance_defect}


def cmd_features(cfg: RunConfig) -> dict:
    out = _require_out(cfg)
    if cfg.flux:
        table = tio.preprocess_flux(tio.load_flux_csv(cfg.flux, cfg.calibration))
        tio.save_flux_csv(table, out, _meta(cfg))
        return {"out": str(out), "preprocessing": table.meta["preprocessing"]}
    feats = _features_for(cfg)
    t = next(iter(feats.values())).t
    header, cols, info = ["time_s"], [t], {}
    for g, f in feats.items():
        # second-order surface step for O2 in CO oxidation
        transform = Transform.SQRT if g == "O2" and "CO" in feats else Transform.IDENTITY
        s = compute_rcd(f, transform=transform)
        header.append(f"rcd_{g}")
        cols.append(s.values)
        info[g] = {"role": s.role.value, "transform": s.transform.value, "masked": s.n_masked, "clipped": s.n_clipped}
    tio._write_columns(out, header, cols, {**_meta(cfg), "rcd": info})
    return {"out": str(out), "rcd": info}


def cmd_fit(cfg: RunConfig) -> dict:
    feats = _features_for(cfg)
    gas = cfg.gas or next(iter(feats))
    if gas not in feats:
        raise ValueError(f"gas {gas!r} not in features (have {sorted(feats)})")
    terms = parse_terms(cfg.terms, gas if len(feats) > 1 else None)
    dm = build_design_matrix(feats, terms, response=feats[gas].rate)
    result = fit(dm, cfg.penalty_spec())
    summary = {"gas": gas, "method": result.method, "coefficients": result.as_dict(), "lambda": result.lambda_chosen}
    if cfg.out:
        tio.write_report(result, cfg.out, {**_meta(cfg), "gas": gas})
    return summary


def cmd_rcdc(cfg: RunConfig) -> dict:
    feats = _features_for(cfg)
    if all(g in feats for g in ("O2", "CO", "CO2")):
        series = co_oxidation_rcds(feats)
    else:
        series = [compute_rcd(f) for f in feats.values()]
    m = rcdc(series, trim=cfg.trim)
    summary: dict = {"labels": list(m.labels), "corr": m.corr.tolist(), "n_points": m.n_points}
    call = None
    if all(g in m.labels for g in ("O2", "CO", "CO2")):
        call = classify_mechanism(m)
        summary["verdict"] = call.verdict.value
    if cfg.out:
        report = tio.report_dict(m)
        if call is not None:
            report["mechanism"] = tio.report_dict(call)
        tio.write_report(report, cfg.out, _meta(cfg))
    return summary


def cmd_grid(cfg: RunConfig) -> dict:
    out = _require_out(cfg)
    axis = k_grid_axis(cfg.k_min, cfg.k_max, cfg.k_step)
    kind = SweepKind(cfg.sweep)
    config = cfg.reactor_config()
    if kind is SweepKind.LH_REV:
        grid = grid_sweep_reversible(axis, axis, config, n_jobs=cfg.jobs)
    else:
        grid = grid_sweep_irreversible(kind, axis, config, n_jobs=cfg.jobs)
    tio.save_grid_csv(grid, out, _meta(cfg))
    return {"out": str(out), "shape": [axis.size, axis.size], "invalid_cells": grid.n_invalid}


COMMANDS = {"simulate": cmd_simulate, "features": cmd_features, "fit": cmd_fit, "rcdc": cmd_rcdc, "grid": cmd_grid}


def run_cli(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(ns)
        if getattr(ns, "flux_out", None):
            cfg._flux_out = ns.flux_out
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            summary = COMMANDS[cfg.mode](cfg)
    except (SimulationError, FloatingPointError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(tio._clean(summary), sort_keys=True))
    return 0


def main() -> None:
    sys.exit(run_cli())
