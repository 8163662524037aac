"""Thin-zone transient features: rate, concentration, uptake, and rate/concentration dependencies."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class Role(enum.Enum):
    REACTANT = "reactant"
    PRODUCT = "product"


class Transform(enum.Enum):
    IDENTITY = "identity"
    SQRT = "sqrt"


@dataclass(frozen=True)
class TransientFeatures:
    """Per-gas series on one uniform time grid.

    ``rate`` is positive when the gas is consumed (reactants) or formed
    (products); ``stoichiometry`` holds the signed coefficient that turns
    ``rate`` into surface uptake, +1 for adsorption and -1 for release.
    """

    gas_id: str
    t: np.ndarray
    rate: np.ndarray
    concentration: np.ndarray
    uptake: np.ndarray
    stoichiometry: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        n = len(self.t)
        for name in ("rate", "concentration", "uptake"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{self.gas_id}: {name} has {len(getattr(self, name))} points, grid has {n}")
        check_uniform_grid(self.t)

    @property
    def role(self) -> Role:
        return Role.PRODUCT if self.stoichiometry[0] < 0 else Role.REACTANT


@dataclass(frozen=True)
class RCDSeries:
    """Rate/concentration dependency of one gas.

    ``mask`` flags the retained points; masked-out entries of ``values`` are nan.
    """

    gas_id: str
    role: Role
    transform: Transform
    values: np.ndarray
    mask: np.ndarray
    n_masked: int = 0
    n_clipped: int = 0
    meta: dict = field(default_factory=dict)


def check_uniform_grid(t: np.ndarray, rel_jitter: float = 1e-9) -> float:
    """Return the grid step; raise if ``t`` is not increasing and uniform."""
    t = np.asarray(t, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ValueError("time grid needs at least two points")
    steps = np.diff(t)
    if np.any(steps <= 0):
        bad = int(np.argmax(steps <= 0)) + 1
        raise ValueError(f"time grid not strictly increasing at row {bad}")
    dt = (t[-1] - t[0]) / (t.size - 1)
    dev = np.abs(steps - dt)
    # jitter relative to the largest time stamp, so 12-digit text round-trips pass
    tol = rel_jitter * max(abs(t[-1]), abs(t[0]), dt)
    worst = int(np.argmax(dev))
    if dev[worst] > tol:
        raise ValueError(f"time grid not uniform at row {worst + 1}: step {steps[worst]!r} vs {dt!r}")
    return dt


def cumulative_trapezoid(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def compute_uptake(rates: Sequence[np.ndarray], stoich: Sequence[float], t: np.ndarray) -> np.ndarray:
    """Cumulative trapezoid integral of ``sum(stoich[i] * rates[i])`` from t[0].

    Positive coefficients mark steps that put the element on the surface,
    negative ones steps that release it.
    """
    t = np.asarray(t, dtype=float)
    if len(rates) != len(stoich):
        raise ValueError(f"{len(rates)} rate series but {len(stoich)} stoichiometric coefficients")
    net = np.zeros_like(t)
    for i, (r, nu) in enumerate(zip(rates, stoich)):
        r = np.asarray(r, dtype=float)
        if r.shape != t.shape:
            raise ValueError(f"rate series {i} has {r.size} points, grid has {t.size}")
        net = net + nu * r
    return cumulative_trapezoid(net, t)


def compute_rcd(
    features: TransientFeatures,
    role: Role | str | None = None,
    transform: Transform | str = Transform.IDENTITY,
    c_floor: float | None = None,
) -> RCDSeries:
    """Rate/concentration dependency: ``r/C`` for reactants, ``r`` for products.

    Reactant points with ``|C| < c_floor`` are masked (default floor is
    1% of the peak concentration). With the square-root transform,
    negative quotients are clipped to zero and counted.
    """
    role = Role(role) if role is not None else features.role
    transform = Transform(transform)
    r = np.asarray(features.rate, dtype=float)
    c = np.asarray(features.concentration, dtype=float)
    n_masked = 0
    if role is Role.PRODUCT:
        mask = np.isfinite(r)
        raw = r.copy()
    else:
        if c_floor is None:
            c_floor = 1e-2 * float(np.nanmax(np.abs(c))) if c.size else 0.0
        mask = np.isfinite(r) & np.isfinite(c) & (np.abs(c) >= c_floor) & (c != 0)
        n_masked = int(np.count_nonzero(~mask))
        if not mask.any():
            raise ValueError(f"{features.gas_id}: every point masked (concentration below {c_floor:g})")
        raw = np.full_like(r, np.nan)
        raw[mask] = r[mask] / c[mask]
    n_clipped = 0
    if transform is Transform.SQRT:
        neg = mask & (raw < 0)
        n_clipped = int(np.count_nonzero(neg))
        raw[neg] = 0.0
        raw[mask] = np.sqrt(raw[mask])
    values = np.where(mask, raw, np.nan)
    return RCDSeries(
        gas_id=features.gas_id,
        role=role,
        transform=transform,
        values=values,
        mask=mask,
        n_masked=n_masked,
        n_clipped=n_clipped,
        meta={"c_floor": c_floor},
    )


def extract_thin_zone_features(sim, gas_id: str) -> TransientFeatures:
    """Thin-zone ``r``, ``C`` and ``U`` of one gas from a simulation result."""
    try:
        return sim.features[gas_id]
    except KeyError:
        raise KeyError(f"gas {gas_id!r} not in simulation (have {sorted(sim.features)})") from None


def ingest_features(path) -> dict[str, TransientFeatures]:
    """Per-gas features from a features CSV (see ``taprcdc.io.load_features_csv``)."""
    from .io import load_features_csv

    return load_features_csv(path)
