"""Rate/concentration dependency correlation (RCDC), grid sweeps and mechanism calls."""

from __future__ import annotations

import enum
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .features import RCDSeries, Role, Transform, compute_rcd
from .reactor import MechanismKind, MechanismSpec, ReactorConfig, SimulationError, simulate_pulse

log = logging.getLogger(__name__)

MIN_POINTS = 50

# reactant RCD transforms for CO oxidation: O2 adsorbs dissociatively
CO_OXIDATION_TRANSFORMS = {"O2": Transform.SQRT, "CO": Transform.IDENTITY, "CO2": Transform.IDENTITY}


def k_grid_axis(lo: float = 0.04, hi: float = 1.0, step: float = 0.02) -> np.ndarray:
    """Rate-constant axis lo, lo+step, ..., hi (rounded to kill float drift)."""
    n = int(round((hi - lo) / step)) + 1
    return np.round(lo + step * np.arange(n), 10)


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation; nan when either series has zero variance."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    da = a - a.mean()
    db = b - b.mean()
    va = float(da @ da)
    vb = float(db @ db)
    if va <= 0 or vb <= 0:
        return float("nan")
    r = float(da @ db) / np.sqrt(va * vb)
    return float(np.clip(r, -1.0, 1.0))


def robust_correlation(a: np.ndarray, b: np.ndarray, trim: float = 0.05, min_points: int = MIN_POINTS) -> float:
    """Winsorized Pearson correlation.

    Each series is clamped to its ``trim`` and ``1 - trim`` quantiles before
    correlating. ``trim = 0`` is plain Pearson. Returns nan when a clamped
    series is constant.
    """
    if not 0 <= trim <= 0.25:
        raise ValueError(f"trim must lie in [0, 0.25], got {trim}")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"series lengths differ: {a.size} vs {b.size}")
    if a.size < min_points:
        raise ValueError(f"need at least {min_points} points, got {a.size}")
    if trim > 0:
        a = np.clip(a, *np.quantile(a, [trim, 1 - trim]))
        b = np.clip(b, *np.quantile(b, [trim, 1 - trim]))
    return pearson(a, b)


@dataclass(frozen=True)
class RCDCMatrix:
    labels: tuple[str, ...]
    corr: np.ndarray
    n_points: int
    roles: tuple[Role, ...] = ()
    transforms: tuple[Transform, ...] = ()

    def __call__(self, a: str, b: str) -> float:
        return float(self.corr[self.labels.index(a), self.labels.index(b)])


def rcdc(series: Sequence[RCDSeries], trim: float = 0.0, min_points: int = MIN_POINTS) -> RCDCMatrix:
    """Pairwise correlation of RCD series over the points unmasked in all of them."""
    if len(series) < 2:
        raise ValueError("need at least two RCD series")
    n = series[0].values.size
    for s in series:
        if s.values.size != n:
            raise ValueError(f"{s.gas_id}: {s.values.size} points, expected {n}")
    mask = np.logical_and.reduce([s.mask for s in series])
    count = int(mask.sum())
    if count < min_points:
        raise ValueError(f"only {count} aligned points (need {min_points})")
    vals = [s.values[mask] for s in series]
    k = len(series)
    corr = np.eye(k)
    for i in range(k):
        if not np.var(vals[i]) > 0:
            corr[i, i] = np.nan
        for j in range(i + 1, k):
            c = robust_correlation(vals[i], vals[j], trim, min_points) if trim > 0 else pearson(vals[i], vals[j])
            corr[i, j] = corr[j, i] = c
    return RCDCMatrix(
        labels=tuple(s.gas_id for s in series),
        corr=corr,
        n_points=count,
        roles=tuple(s.role for s in series),
        transforms=tuple(s.transform for s in series),
    )


def co_oxidation_rcds(features: dict, c_floor_rel: float | None = None) -> list[RCDSeries]:
    """O2, CO and CO2 RCD series: sqrt(r/C), r/C and r."""
    out = []
    for gas in ("O2", "CO", "CO2"):
        f = features[gas]
        floor = None if c_floor_rel is None else c_floor_rel * float(np.max(np.abs(f.concentration)))
        out.append(compute_rcd(f, transform=CO_OXIDATION_TRANSFORMS[gas], c_floor=floor))
    return out


# --- classification ------------------------------------------------------------

class Verdict(enum.Enum):
    ELEY_RIDEAL = "EleyRideal"
    LANGMUIR_HINSHELWOOD = "LangmuirHinshelwood"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class MechanismCall:
    verdict: Verdict
    evidence: dict
    notes: str = ""


def classify_correlations(c_a: float, c_b: float, tol: float = 0.1) -> Verdict:
    """Sign rule on the two reactant-to-product correlations."""
    if not (np.isfinite(c_a) and np.isfinite(c_b)):
        return Verdict.INDETERMINATE
    if c_a < 0 and c_b < 0:
        return Verdict.LANGMUIR_HINSHELWOOD
    if c_a * c_b < 0 and abs(abs(c_a) - abs(c_b)) <= tol:
        return Verdict.ELEY_RIDEAL
    return Verdict.INDETERMINATE


def classify_mechanism(
    m: RCDCMatrix,
    reactants: Sequence[str] = ("O2", "CO"),
    product: str = "CO2",
    tol: float = 0.1,
) -> MechanismCall:
    """Both reactant/product correlations negative: LH. Opposite signs, equal size: ER."""
    if len(reactants) != 2:
        raise ValueError("exactly two reactants are compared")
    ra, rb = reactants
    c_a, c_b = m(ra, product), m(rb, product)
    verdict = classify_correlations(c_a, c_b, tol)
    evidence = {
        f"{ra}->{product}": c_a,
        f"{rb}->{product}": c_b,
        "magnitude_gap": abs(abs(c_a) - abs(c_b)) if np.isfinite(c_a) and np.isfinite(c_b) else float("nan"),
        "n_points": m.n_points,
    }
    notes = ""
    if verdict is Verdict.INDETERMINATE:
        if not (np.isfinite(c_a) and np.isfinite(c_b)):
            notes = "undefined correlation"
        elif c_a > 0 and c_b > 0:
            notes = "both correlations positive; no rule covers this"
        elif c_a * c_b < 0:
            notes = f"opposite signs but magnitudes differ by more than {tol}"
        else:
            notes = "a correlation is exactly zero"
    return MechanismCall(verdict, evidence, notes)


# --- grid sweeps -----------------------------------------------------------------

class SweepKind(enum.Enum):
    ER_IRREV = "er-irrev"
    LH_IRREV = "lh-irrev"
    LH_REV = "lh-rev"


# correlation cells kept per grid point
PAIRS = (("O2", "CO2"), ("CO", "CO2"), ("O2", "CO"))


def pair_key(a: str, b: str) -> str:
    return f"{a}_{b}"


@dataclass
class CorrelationGrid:
    """Correlations over a 2-D rate-constant grid; ``cells[key][i, j]`` belongs to (axis1[i], axis2[j])."""

    sweep_kind: SweepKind
    axis1: np.ndarray
    axis2: np.ndarray
    cells: dict[str, np.ndarray]
    axis_names: tuple[str, str] = ("k_axis1", "k_axis2")
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sweep_kind = SweepKind(self.sweep_kind)
        for name, ax in (("axis1", self.axis1), ("axis2", self.axis2)):
            if np.any(np.diff(ax) <= 0):
                raise ValueError(f"{name} must be strictly increasing")
        shape = (len(self.axis1), len(self.axis2))
        for key, v in self.cells.items():
            if v.shape != shape:
                raise ValueError(f"cell block {key} has shape {v.shape}, expected {shape}")

    @property
    def n_invalid(self) -> int:
        return int(sum(np.isnan(v).sum() for v in self.cells.values()))

    def verdicts(self, tol: float = 0.1) -> np.ndarray:
        a, b = self.cells[pair_key("O2", "CO2")], self.cells[pair_key("CO", "CO2")]
        out = np.empty(a.shape, dtype=object)
        for idx in np.ndindex(a.shape):
            out[idx] = classify_correlations(a[idx], b[idx], tol)
        return out


def _sweep_mechanism(kind: SweepKind, k1: float, k2: float, k_o: float, k_co2: float, n_sites: float) -> MechanismSpec:
    if kind is SweepKind.ER_IRREV:
        return MechanismSpec(MechanismKind.ELEY_RIDEAL, {"O2": k1, "CO": k2}, n_sites=n_sites)
    if kind is SweepKind.LH_IRREV:
        return MechanismSpec(MechanismKind.LANGMUIR_HINSHELWOOD, {"O2": k1, "CO": k2, "CO2": k_co2}, n_sites=n_sites)
    return MechanismSpec(
        MechanismKind.LANGMUIR_HINSHELWOOD,
        {"O2": k_o, "CO": k1, "CO2": k_co2},
        {"CO": k2},
        n_sites=n_sites,
    )


def _cell(args) -> tuple[float, ...]:
    kind, k1, k2, config, k_o, k_co2, n_sites, c_floor_rel = args
    try:
        sim = simulate_pulse(config, _sweep_mechanism(kind, k1, k2, k_o, k_co2, n_sites))
        m = rcdc(co_oxidation_rcds(sim.features, c_floor_rel))
        return tuple(m(a, b) for a, b in PAIRS) + (sim.mass_balance_defect,)
    except (SimulationError, ValueError) as exc:
        log.warning("grid cell (%g, %g) failed: %s", k1, k2, exc)
        return (float("nan"),) * (len(PAIRS) + 1)


def _sweep(
    kind: SweepKind,
    axis1: np.ndarray,
    axis2: np.ndarray,
    config: ReactorConfig | None,
    k_o: float,
    k_co2: float,
    n_sites: float,
    c_floor_rel: float | None,
    n_jobs: int,
) -> CorrelationGrid:
    config = config or ReactorConfig()
    axis1 = np.asarray(axis1, dtype=float)
    axis2 = np.asarray(axis2, dtype=float)
    jobs = [
        (kind, float(a), float(b), config, k_o, k_co2, n_sites, c_floor_rel)
        for a in axis1
        for b in axis2
    ]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_cell, jobs, chunksize=max(1, len(jobs) // (4 * n_jobs))))
    else:
        results = [_cell(j) for j in jobs]
    arr = np.array(results, dtype=float).reshape(axis1.size, axis2.size, len(PAIRS) + 1)
    cells = {pair_key(a, b): arr[:, :, i].copy() for i, (a, b) in enumerate(PAIRS)}
    names = ("k_CO_fwd", "k_CO_rev") if kind is SweepKind.LH_REV else ("k_O", "k_CO")
    defects = arr[:, :, -1]
    worst = float(np.nanmax(defects)) if np.isfinite(defects).any() else float("nan")
    meta = {"k_O": k_o, "k_CO2": k_co2, "n_sites": n_sites, "c_floor_rel": c_floor_rel, "max_mass_balance_defect": worst}
    return CorrelationGrid(kind, axis1, axis2, cells, names, meta)


def grid_sweep_irreversible(
    kind: SweepKind | str,
    k_grid: np.ndarray | tuple[np.ndarray, np.ndarray] | None = None,
    config: ReactorConfig | None = None,
    k_co2: float = 5.0,
    n_sites: float = 1.0,
    c_floor_rel: float | None = None,
    n_jobs: int = 1,
) -> CorrelationGrid:
    """RCDC over (k_O, k_CO) for irreversible ER or LH.

    ``k_grid`` is one axis used for both constants or an (axis1, axis2) pair.
    Cells whose simulation fails are nan.
    """
    kind = SweepKind(kind)
    if kind is SweepKind.LH_REV:
        raise ValueError("use grid_sweep_reversible for the reversible sweep")
    if k_grid is None:
        k_grid = k_grid_axis()
    ax1, ax2 = k_grid if isinstance(k_grid, tuple) else (k_grid, k_grid)
    return _sweep(kind, ax1, ax2, config, 0.0, k_co2, n_sites, c_floor_rel, n_jobs)


def grid_sweep_reversible(
    k_fwd_grid: np.ndarray | None = None,
    k_rev_grid: np.ndarray | None = None,
    config: ReactorConfig | None = None,
    k_o: float = 0.2,
    k_co2: float = 5.0,
    n_sites: float = 1.0,
    c_floor_rel: float | None = None,
    n_jobs: int = 1,
) -> CorrelationGrid:
    """RCDC over (k_CO forward, k_CO reverse) for LH at fixed k_O and k_CO2."""
    k_fwd_grid = k_grid_axis() if k_fwd_grid is None else k_fwd_grid
    k_rev_grid = k_grid_axis() if k_rev_grid is None else k_rev_grid
    return _sweep(SweepKind.LH_REV, k_fwd_grid, k_rev_grid, config, k_o, k_co2, n_sites, c_floor_rel, n_jobs)

