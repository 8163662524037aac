"""CSV ingestion and serialization, flux preprocessing, and run reports.

Every file written here starts with ``#`` comment lines carrying the
effective configuration as JSON, so a run can be traced from its outputs.
Numbers are written with 12 significant digits.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field, is_dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .features import Role, TransientFeatures, check_uniform_grid

SIG = 12
MAX_NAN_RUN = 5


class SchemaError(ValueError):
    """Malformed input file."""


def fmt(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.{SIG}g}"


def tool_version() -> str:
    from . import __version__

    return __version__


# --- comment-header metadata ----------------------------------------------------

def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if hasattr(obj, "value"):  # enums
        return obj.value
    if is_dataclass(obj):
        return asdict(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _clean(obj):
    """Round floats to 12 significant digits and map non-finite values to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(fmt(x)) if math.isfinite(x) else fmt(x)
    if hasattr(obj, "value") and not isinstance(obj, str):
        return obj.value
    if is_dataclass(obj):
        return _clean(asdict(obj))
    return obj


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, default=_json_default)


def _write_header(fh, meta: Mapping[str, Any]) -> None:
    full = {"tool": "taprcdc", "version": tool_version(), **meta}
    for key in sorted(full):
        fh.write(f"# {key}: {_dumps(full[key])}\n")


def _read_table(path: str | Path) -> tuple[dict, list[str], list[list[str]]]:
    """Split a commented CSV into (metadata, header, rows)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"{path}: no such file")
    meta: dict = {}
    header: list[str] | None = None
    rows: list[list[str]] = []
    with path.open(newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    key, _, val = body.partition(":")
                    try:
                        meta[key.strip()] = json.loads(val)
                    except json.JSONDecodeError:
                        meta[key.strip()] = val.strip()
                continue
            if not line.strip():
                continue
            cells = next(csv.reader([line]))
            if header is None:
                header = [c.strip() for c in cells]
            else:
                rows.append([c.strip() for c in cells])
    if header is None:
        raise SchemaError(f"{path}: empty file (no header row)")
    return meta, header, rows


def _numeric_columns(path, header: list[str], rows: list[list[str]]) -> np.ndarray:
    if not rows:
        raise SchemaError(f"{path}: header present but no data rows")
    out = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows):
        # data rows are numbered from 1 after the header
        if len(row) != len(header):
            raise SchemaError(f"{path}: data row {i + 1} has {len(row)} fields, header has {len(header)}")
        for j, cell in enumerate(row):
            try:
                out[i, j] = float(cell)
            except ValueError:
                raise SchemaError(f"{path}: data row {i + 1}, column {header[j]!r}: not a number ({cell!r})") from None
    return out


def _fill_short_gaps(col: np.ndarray, name: str, path) -> tuple[np.ndarray, int]:
    """Linearly interpolate NaN runs up to MAX_NAN_RUN samples; longer runs are rejected."""
    bad = np.isnan(col)
    if not bad.any():
        return col, 0
    edges = np.diff(np.concatenate([[0], bad.astype(int), [0]]))
    starts, ends = np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)
    for s, e in zip(starts, ends):
        if e - s > MAX_NAN_RUN:
            raise SchemaError(f"{path}: column {name!r} has {e - s} consecutive NaN values starting at data row {s + 1}")
    good = ~bad
    if good.sum() < 2:
        raise SchemaError(f"{path}: column {name!r} has fewer than two finite values")
    idx = np.arange(col.size)
    out = col.copy()
    out[bad] = np.interp(idx[bad], idx[good], col[good])
    return out, int(bad.sum())


def _check_time(path, t: np.ndarray) -> None:
    try:
        check_uniform_grid(t)
    except ValueError as exc:
        raise SchemaError(f"{path}: column 'time_s': {exc}") from None


# --- flux tables ------------------------------------------------------------------

@dataclass(frozen=True)
class CalibrationSpec:
    """``mu`` converts instrument units to mol/s; the baseline is averaged over ``baseline_window``."""

    mu: float = 1.0
    baseline_window: tuple[float, float] | None = None

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"calibration coefficient must be positive, got {self.mu}")
        if self.baseline_window is not None:
            a, b = self.baseline_window
            if not b > a:
                raise ValueError(f"empty baseline window [{a}, {b}]")


@dataclass
class FluxTable:
    t: np.ndarray
    flux: dict[str, np.ndarray]
    calibration: dict[str, CalibrationSpec] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        check_uniform_grid(self.t)
        for g, v in self.flux.items():
            if len(v) != self.t.size:
                raise ValueError(f"flux column {g!r} has {len(v)} points, grid has {self.t.size}")

    @property
    def gases(self) -> tuple[str, ...]:
        return tuple(self.flux)


def _baseline_mask(t: np.ndarray, window: tuple[float, float] | None) -> np.ndarray:
    if window is None:
        # leading 5% of the record
        n = max(1, int(math.ceil(0.05 * t.size)))
        mask = np.zeros(t.size, dtype=bool)
        mask[:n] = True
        return mask
    a, b = window
    return (t >= a) & (t <= b)


def preprocess_flux(table: FluxTable) -> FluxTable:
    """Baseline-subtract and scale each column: mu * (F - mean(F over baseline window))."""
    out, applied = {}, {}
    for g, raw in table.flux.items():
        cal = table.calibration.get(g, CalibrationSpec())
        raw = np.asarray(raw, dtype=float)
        mask = _baseline_mask(table.t, cal.baseline_window)
        if not mask.any():
            raise ValueError(f"{g}: baseline window {cal.baseline_window} contains no samples")
        base = float(raw[mask].mean())
        peak = float(np.max(np.abs(raw)))
        if peak > 0 and abs(base) > 0.1 * peak:
            warnings.warn(
                f"{g}: baseline mean {base:.3g} exceeds 10% of the column maximum {peak:.3g}; "
                "the window may overlap the pulse",
                RuntimeWarning,
            )
        out[g] = cal.mu * (raw - base)
        applied[g] = {"mu": cal.mu, "baseline": base, "baseline_samples": int(mask.sum())}
    meta = {**table.meta, "preprocessing": applied}
    return FluxTable(table.t.copy(), out, dict(table.calibration), meta)


def load_calibration(path: str | Path) -> dict[str, CalibrationSpec]:
    """Sidecar lines ``<gas>,mu=<float>,baseline_start=<float>,baseline_end=<float>``."""
    path = Path(path)
    specs = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        gas, *fields = [p.strip() for p in line.split(",")]
        kv = {}
        for f in fields:
            key, sep, val = f.partition("=")
            if not sep:
                raise SchemaError(f"{path}: line {lineno}: expected key=value, got {f!r}")
            try:
                kv[key.strip()] = float(val)
            except ValueError:
                raise SchemaError(f"{path}: line {lineno}: {key.strip()} is not a number ({val!r})") from None
        unknown = set(kv) - {"mu", "baseline_start", "baseline_end"}
        if unknown:
            raise SchemaError(f"{path}: line {lineno}: unknown keys {sorted(unknown)}")
        window = None
        if "baseline_start" in kv or "baseline_end" in kv:
            if not ("baseline_start" in kv and "baseline_end" in kv):
                raise SchemaError(f"{path}: line {lineno}: baseline_start and baseline_end go together")
            window = (kv["baseline_start"], kv["baseline_end"])
        try:
            specs[gas] = CalibrationSpec(kv.get("mu", 1.0), window)
        except ValueError as exc:
            raise SchemaError(f"{path}: line {lineno}: {exc}") from None
    return specs


def load_flux_csv(path: str | Path, calibration: str | Path | None = None) -> FluxTable:
    """Read ``time_s,<gas>,...``; the calibration sidecar defaults to ``<path>.cal`` when present."""
    meta, header, rows = _read_table(path)
    if header[0] != "time_s":
        raise SchemaError(f"{path}: first column must be 'time_s', got {header[0]!r}")
    gases = header[1:]
    if not gases:
        raise SchemaError(f"{path}: no flux columns")
    dup = sorted({g for g in gases if gases.count(g) > 1})
    if dup:
        raise SchemaError(f"{path}: duplicate gas columns {dup}")
    data = _numeric_columns(path, header, rows)
    t = data[:, 0]
    _check_time(path, t)
    flux = {}
    for j, g in enumerate(gases, start=1):
        flux[g], _ = _fill_short_gaps(data[:, j], g, path)
    cal_path = Path(calibration) if calibration is not None else Path(str(path) + ".cal")
    cal = {}
    if calibration is not None or cal_path.exists():
        cal = load_calibration(cal_path)
        missing = sorted(set(cal) - set(gases))
        if missing:
            raise SchemaError(f"{cal_path}: calibration for unknown gases {missing}")
    return FluxTable(t, flux, cal, meta)


def save_flux_csv(table: FluxTable, path: str | Path, meta: Mapping[str, Any] | None = None) -> None:
    header = ["time_s", *table.gases]
    cols = [table.t, *(table.flux[g] for g in table.gases)]
    _write_columns(path, header, cols, {**table.meta, **(meta or {})})


# --- features ---------------------------------------------------------------------

def _write_columns(path, header: list[str], cols: list[np.ndarray], meta: Mapping[str, Any]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        _write_header(fh, meta)
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(fmt(v) for v in row) + "\n")


def save_features_csv(features: Mapping[str, TransientFeatures], path: str | Path, meta: Mapping[str, Any] | None = None) -> None:
    """Write ``time_s,r_<gas>,C_<gas>,U_<gas>`` per gas; stoichiometric roles go to the header."""
    if not features:
        raise ValueError("no features to write")
    gases = list(features)
    t = features[gases[0]].t
    header, cols = ["time_s"], [t]
    for g in gases:
        f = features[g]
        if f.t.size != t.size or not np.array_equal(f.t, t):
            raise ValueError(f"{g}: features are on a different time grid")
        header += [f"r_{g}", f"C_{g}", f"U_{g}"]
        cols += [f.rate, f.concentration, f.uptake]
    roles = {g: features[g].role.value for g in gases}
    _write_columns(path, header, cols, {**(meta or {}), "roles": roles})


def load_features_csv(path: str | Path) -> dict[str, TransientFeatures]:
    """Read a features file; short NaN gaps (up to 5 samples) are interpolated."""
    meta, header, rows = _read_table(path)
    if header[0] != "time_s":
        raise SchemaError(f"{path}: first column must be 'time_s', got {header[0]!r}")
    gases: list[str] = []
    for name in header[1:]:
        prefix, sep, gas = name.partition("_")
        if not sep or prefix not in ("r", "C", "U") or not gas:
            raise SchemaError(f"{path}: unexpected column {name!r} (want r_<gas>, C_<gas>, U_<gas>)")
        if gas not in gases:
            gases.append(gas)
    if not gases:
        raise SchemaError(f"{path}: no feature columns")
    for g in gases:
        missing = [f"{p}_{g}" for p in ("r", "C", "U") if f"{p}_{g}" not in header]
        if missing:
            raise SchemaError(f"{path}: gas {g!r} lacks columns {missing}")
    dup = sorted({h for h in header if header.count(h) > 1})
    if dup:
        raise SchemaError(f"{path}: duplicate columns {dup}")
    data = _numeric_columns(path, header, rows)
    t = data[:, 0]
    if np.isnan(t).any():
        raise SchemaError(f"{path}: column 'time_s' has NaN at data row {int(np.argmax(np.isnan(t))) + 1}")
    _check_time(path, t)
    roles = meta.get("roles", {}) if isinstance(meta.get("roles"), dict) else {}
    out = {}
    for g in gases:
        cols = {}
        for p in ("r", "C", "U"):
            name = f"{p}_{g}"
            cols[p], _ = _fill_short_gaps(data[:, header.index(name)], name, path)
        nu = -1.0 if roles.get(g) == Role.PRODUCT.value else 1.0
        out[g] = TransientFeatures(g, t, cols["r"], cols["C"], cols["U"], (nu,))
    return out


def features_metadata(path: str | Path) -> dict:
    return _read_table(path)[0]


# --- correlation grids ------------------------------------------------------------

def save_grid_csv(grid, path: str | Path, meta: Mapping[str, Any] | None = None) -> None:
    """One row per cell: ``k_axis1,k_axis2,corr_<a>_<b>,...``; failed cells read ``nan``."""
    keys = list(grid.cells)
    header = ["k_axis1", "k_axis2", *(f"corr_{k}" for k in keys)]
    a1, a2 = np.meshgrid(grid.axis1, grid.axis2, indexing="ij")
    cols = [a1.ravel(), a2.ravel(), *(grid.cells[k].ravel() for k in keys)]
    info = {
        "sweep": grid.sweep_kind.value,
        "axis_names": list(grid.axis_names),
        "grid_meta": grid.meta,
    }
    _write_columns(path, header, cols, {**info, **(meta or {})})


def load_grid_csv(path: str | Path):
    from .mechanism import CorrelationGrid

    meta, header, rows = _read_table(path)
    if header[:2] != ["k_axis1", "k_axis2"] or len(header) < 3:
        raise SchemaError(f"{path}: header must start with k_axis1,k_axis2 and name at least one corr_ column")
    bad = [h for h in header[2:] if not h.startswith("corr_")]
    if bad:
        raise SchemaError(f"{path}: unexpected columns {bad}")
    data = _numeric_columns(path, header, rows)
    ax1 = np.unique(data[:, 0])
    ax2 = np.unique(data[:, 1])
    if ax1.size * ax2.size != data.shape[0]:
        raise SchemaError(f"{path}: {data.shape[0]} rows do not form a {ax1.size}x{ax2.size} grid")
    i = np.searchsorted(ax1, data[:, 0])
    j = np.searchsorted(ax2, data[:, 1])
    cells = {}
    for c, name in enumerate(header[2:], start=2):
        block = np.full((ax1.size, ax2.size), np.nan)
        block[i, j] = data[:, c]
        cells[name[len("corr_"):]] = block
    if "sweep" not in meta:
        raise SchemaError(f"{path}: missing '# sweep:' metadata line")
    names = tuple(meta.get("axis_names", ("k_axis1", "k_axis2")))
    return CorrelationGrid(meta["sweep"], ax1, ax2, cells, names, meta.get("grid_meta", {}))


# --- reports ----------------------------------------------------------------------

def report_dict(obj) -> dict:
    """Plain-data view of a fit, correlation matrix, grid, or mechanism call."""
    from .mechanism import CorrelationGrid, MechanismCall, RCDCMatrix
    from .regress import RegressionFit

    if isinstance(obj, RegressionFit):
        return {
            "kind": "fit",
            "method": obj.method,
            "coefficients": obj.as_dict(),
            "selected": {lab: bool(s) for lab, s in zip(obj.labels, obj.selected)},
            "intercept": obj.intercept,
            "lambda_chosen": obj.lambda_chosen,
            "lambda_grid": obj.lambda_grid,
            "cv_curve": obj.cv_curve,
            "residual_rmse": obj.residual_rmse,
            "objective": obj.objective,
            "converged": obj.converged,
            "zero_tol": obj.zero_tol,
        }
    if isinstance(obj, RCDCMatrix):
        return {
            "kind": "rcdc",
            "labels": list(obj.labels),
            "transforms": [t.value for t in obj.transforms],
            "corr": obj.corr,
            "n_points": obj.n_points,
        }
    if isinstance(obj, MechanismCall):
        return {"kind": "mechanism", "verdict": obj.verdict.value, "evidence": obj.evidence, "notes": obj.notes}
    if isinstance(obj, CorrelationGrid):
        return {
            "kind": "grid",
            "sweep": obj.sweep_kind.value,
            "axis_names": list(obj.axis_names),
            "axis1": obj.axis1,
            "axis2": obj.axis2,
            "cells": obj.cells,
            "meta": obj.meta,
        }
    if isinstance(obj, Mapping):
        return dict(obj)
    raise TypeError(f"no report layout for {type(obj).__name__}")


def write_report(obj, path: str | Path, meta: Mapping[str, Any] | None = None) -> dict:
    """Write a JSON report with sorted keys and 12-digit numbers; returns what was written."""
    body = {"tool": "taprcdc", "version": tool_version(), **(meta or {}), "result": report_dict(obj)}
    text = json.dumps(_clean(body), sort_keys=True, indent=2, default=_json_default) + "\n"
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return json.loads(text)
