"""Thin-zone TAP reactor: method-of-lines Knudsen diffusion with a catalytic node.

The bed [0, L] is split into ``n_cells`` equal intervals. Unknowns are gas
concentrations (mol/m) at the nodes x_i = i*h, i = 0..n_cells-1; the node at
x = L is held at zero (vacuum outlet). Node 0 carries a half control volume
and a zero-flux inlet, so the pulse sits exactly at x = 0. The catalyst is a
single interior node whose reaction terms act as point sources/sinks.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .features import TransientFeatures, compute_uptake, cumulative_trapezoid

log = logging.getLogger(__name__)


class SimulationError(RuntimeError):
    """Integrator failure or an unphysical solution."""


@dataclass(frozen=True)
class ReactorConfig:
    length: float = 1.0
    porosity: float = 0.5
    diffusivity: float = 1.0
    pulse_moles: float = 1.0
    t_end: float = 3.0
    dt_out: float = 0.001
    n_cells: int = 200
    catalyst_cell: int | None = None
    rtol: float = 1e-8
    atol: float = 1e-12

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError("length must be positive")
        if not 0 < self.porosity < 1:
            raise ValueError("porosity must lie in (0, 1)")
        if not self.diffusivity > 0:
            raise ValueError("diffusivity must be positive")
        if self.pulse_moles < 0:
            raise ValueError("pulse_moles must be non-negative")
        if not self.t_end > self.dt_out > 0:
            raise ValueError("need t_end > dt_out > 0")
        if self.n_cells < 50:
            raise ValueError("n_cells must be at least 50")
        if not 0 < self.cat_index < self.n_cells - 1:
            raise ValueError("catalyst_cell must be strictly interior")

    @property
    def h(self) -> float:
        return self.length / self.n_cells

    @property
    def cat_index(self) -> int:
        return self.n_cells // 2 if self.catalyst_cell is None else int(self.catalyst_cell)

    @property
    def t_grid(self) -> np.ndarray:
        n = int(np.floor(self.t_end / self.dt_out + 1e-9)) + 1
        return np.arange(n) * self.dt_out

    @property
    def residence_time(self) -> float:
        """eps L^2 / D, the scale of the dimensionless diffusion time."""
        return self.porosity * self.length**2 / self.diffusivity


class MechanismKind(enum.Enum):
    INERT = "inert"
    IRREVERSIBLE_ABUNDANT = "irreversible-abundant"
    IRREVERSIBLE_LIMITED = "irreversible-limited"
    REVERSIBLE = "reversible"
    ELEY_RIDEAL = "eley-rideal"
    LANGMUIR_HINSHELWOOD = "langmuir-hinshelwood"


_SINGLE_GAS = {
    MechanismKind.IRREVERSIBLE_ABUNDANT,
    MechanismKind.IRREVERSIBLE_LIMITED,
    MechanismKind.REVERSIBLE,
}
_CO_OXIDATION = {MechanismKind.ELEY_RIDEAL, MechanismKind.LANGMUIR_HINSHELWOOD}


@dataclass(frozen=True)
class MechanismSpec:
    """Rate constants and site count for one preset mechanism.

    Single-gas kinds use the gas ``"A"``; k_forward["A"] is the apparent
    first-order constant (m/s) for the abundant-site kind and the adsorption
    constant (m^2/mol/s) otherwise. CO oxidation kinds use O2, CO (pulsed)
    and CO2 (formed); LH also needs k_forward["CO2"] for the surface step and
    accepts k_reverse["CO"]. ``inerts`` are extra non-reacting pulsed tracers.
    """

    kind: MechanismKind
    k_forward: Mapping[str, float] = field(default_factory=dict)
    k_reverse: Mapping[str, float] = field(default_factory=dict)
    n_sites: float = 1.0
    co_delay: float = 0.0
    inerts: tuple[str, ...] = ()
    shared_sites: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", MechanismKind(self.kind))
        object.__setattr__(self, "k_forward", dict(self.k_forward))
        object.__setattr__(self, "k_reverse", dict(self.k_reverse))
        for name, k in {**self.k_forward, **self.k_reverse}.items():
            if not k >= 0:
                raise ValueError(f"rate constant for {name} must be non-negative, got {k}")
        if self.co_delay < 0:
            raise ValueError("co_delay must be non-negative")
        kind = self.kind
        needs_sites = kind not in (MechanismKind.INERT, MechanismKind.IRREVERSIBLE_ABUNDANT)
        if needs_sites and not self.n_sites > 0:
            raise ValueError(f"{kind.value} needs n_sites > 0")
        allowed_rev = {MechanismKind.REVERSIBLE: {"A"}, MechanismKind.LANGMUIR_HINSHELWOOD: {"CO"}}.get(kind, set())
        extra = set(self.k_reverse) - allowed_rev
        if extra:
            raise ValueError(f"{kind.value} has no reverse step for {sorted(extra)}")
        missing = set(self.required_forward) - set(self.k_forward)
        if missing:
            raise ValueError(f"{kind.value} needs k_forward for {sorted(missing)}")

    @property
    def required_forward(self) -> tuple[str, ...]:
        if self.kind in _SINGLE_GAS:
            return ("A",)
        if self.kind is MechanismKind.ELEY_RIDEAL:
            return ("O2", "CO")
        if self.kind is MechanismKind.LANGMUIR_HINSHELWOOD:
            return ("O2", "CO", "CO2")
        return ()

    @property
    def reactive_gases(self) -> tuple[str, ...]:
        if self.kind in _SINGLE_GAS:
            return ("A",)
        if self.kind in _CO_OXIDATION:
            return ("O2", "CO", "CO2")
        return ()

    @property
    def gases(self) -> tuple[str, ...]:
        return self.reactive_gases + tuple(self.inerts)

    @property
    def pulsed(self) -> tuple[str, ...]:
        return tuple(g for g in self.gases if g != "CO2")

    @property
    def products(self) -> tuple[str, ...]:
        return ("CO2",) if self.kind in _CO_OXIDATION else ()

    @property
    def surface_species(self) -> tuple[str, ...]:
        if self.kind in _SINGLE_GAS:
            return ("A*",)
        if self.kind is MechanismKind.ELEY_RIDEAL:
            return ("O*",)
        if self.kind is MechanismKind.LANGMUIR_HINSHELWOOD:
            return ("O*", "CO*")
        return ()

    def rates(self, conc: Mapping[str, np.ndarray], cov: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
        """Thin-zone gas rates, positive for consumption of reactants and formation of products."""
        kf, kr, n = self.k_forward, self.k_reverse, self.n_sites
        kind = self.kind
        if kind is MechanismKind.IRREVERSIBLE_ABUNDANT:
            return {"A": kf["A"] * conc["A"]}
        if kind is MechanismKind.IRREVERSIBLE_LIMITED:
            return {"A": kf["A"] * conc["A"] * (n - cov["A*"])}
        if kind is MechanismKind.REVERSIBLE:
            return {"A": kf["A"] * conc["A"] * (n - cov["A*"]) - kr.get("A", 0.0) * cov["A*"]}
        if kind is MechanismKind.ELEY_RIDEAL:
            u_o = cov["O*"]
            r_o2 = kf["O2"] * conc["O2"] * (n - u_o) ** 2
            r_co = kf["CO"] * conc["CO"] * u_o
            return {"O2": r_o2, "CO": r_co, "CO2": r_co}
        if kind is MechanismKind.LANGMUIR_HINSHELWOOD:
            u_o, u_co = cov["O*"], cov["CO*"]
            free = n - u_o - u_co
            r_o2 = kf["O2"] * conc["O2"] * (free if self.shared_sites else n - u_o) ** 2
            r_co = kf["CO"] * conc["CO"] * (n - u_o - u_co) - kr.get("CO", 0.0) * u_co
            r_co2 = kf["CO2"] * u_o * u_co
            return {"O2": r_o2, "CO": r_co, "CO2": r_co2}
        return {}

    def surface_rates(self, rates: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
        kind = self.kind
        if kind in _SINGLE_GAS:
            return {"A*": rates["A"]}
        if kind is MechanismKind.ELEY_RIDEAL:
            return {"O*": 2.0 * rates["O2"] - rates["CO"]}
        if kind is MechanismKind.LANGMUIR_HINSHELWOOD:
            return {"O*": 2.0 * rates["O2"] - rates["CO2"], "CO*": rates["CO"] - rates["CO2"]}
        return {}


# Table 2 cases; case 2b takes k+ = 0.5 so the reactivities match the tabulated (0.2, -0.5, 0).
PRESETS: dict[str, MechanismSpec] = {
    "inert": MechanismSpec(MechanismKind.INERT, inerts=("Ar",)),
    "table2-case1": MechanismSpec(MechanismKind.IRREVERSIBLE_ABUNDANT, {"A": 0.2}),
    "table2-case2a": MechanismSpec(MechanismKind.IRREVERSIBLE_LIMITED, {"A": 0.2}, n_sites=1.0),
    "table2-case2b": MechanismSpec(MechanismKind.IRREVERSIBLE_LIMITED, {"A": 0.5}, n_sites=0.4),
    "table2-case3": MechanismSpec(MechanismKind.REVERSIBLE, {"A": 0.2}, {"A": 40.0}, n_sites=1.0),
    "er-irrev": MechanismSpec(MechanismKind.ELEY_RIDEAL, {"O2": 0.2, "CO": 0.5}, n_sites=1.0),
    "lh-irrev": MechanismSpec(MechanismKind.LANGMUIR_HINSHELWOOD, {"O2": 0.2, "CO": 0.5, "CO2": 5.0}, n_sites=1.0),
}

# true reactivities of the Table 2 cases over the full rate-reactivity term set
PRESET_TRUTH: dict[str, dict[str, float]] = {
    "table2-case1": {"C": 0.2, "U": 0.0, "CU": 0.0, "CU2": 0.0, "U2": 0.0},
    "table2-case2a": {"C": 0.2, "U": 0.0, "CU": -0.2, "CU2": 0.0, "U2": 0.0},
    "table2-case2b": {"C": 0.2, "U": 0.0, "CU": -0.5, "CU2": 0.0, "U2": 0.0},
    "table2-case3": {"C": 0.2, "U": -40.0, "CU": -0.2, "CU2": 0.0, "U2": 0.0},
}


@dataclass
class SimulationResult:
    t: np.ndarray
    outlet_flux: dict[str, np.ndarray]
    features: dict[str, TransientFeatures]
    coverage: dict[str, np.ndarray]
    gas_holdup: dict[str, np.ndarray]
    mass_balance_defect: float
    config: ReactorConfig
    mechanism: MechanismSpec
    stats: dict = field(default_factory=dict)

    @property
    def gases(self) -> tuple[str, ...]:
        return tuple(self.outlet_flux)


def diffusion_operator(config: ReactorConfig) -> tuple[sp.csr_matrix, np.ndarray]:
    """Sparse operator A with dC/dt = A C for one gas, and the node control volumes."""
    n, h = config.n_cells, config.h
    vol = np.full(n, h)
    vol[0] = 0.5 * h
    g = config.diffusivity / h
    main = np.full(n, -2.0 * g)
    main[0] = -g
    off = np.full(n - 1, g)
    a = sp.diags([off, main, off], [-1, 0, 1], format="csr")
    scale = 1.0 / (config.porosity * vol)
    return sp.diags(scale) @ a, vol


def _pulse_vector(config: ReactorConfig, vol: np.ndarray) -> np.ndarray:
    c0 = np.zeros(config.n_cells)
    c0[0] = config.pulse_moles / (config.porosity * vol[0])
    return c0


class _PulseSystem:
    """Right-hand side and sparse Jacobian for one mechanism in one reactor."""

    def __init__(self, config: ReactorConfig, mech: MechanismSpec):
        self.config = config
        self.mech = mech
        self.gases = mech.gases
        self.surf = mech.surface_species
        self.nc = config.n_cells
        self.ng = len(self.gases)
        self.ns = len(self.surf)
        self.cat = config.cat_index
        a, self.vol = diffusion_operator(config)
        self.a = a
        self.big_a = sp.block_diag([a] * self.ng + [sp.csr_matrix((self.ns, self.ns))], format="csr")
        self.cat_rows = np.array([i * self.nc + self.cat for i in range(self.ng)])
        self.surf_rows = np.arange(self.ns) + self.ng * self.nc
        self.local = np.concatenate([self.cat_rows, self.surf_rows])
        self.sink = 1.0 / (config.porosity * self.vol[self.cat])
        self.sign = np.array([-1.0 if g in mech.products else 1.0 for g in self.gases])
        self.reactive = np.array([g in mech.reactive_gases for g in self.gases])
        self.n_state = self.ng * self.nc + self.ns

    def _local_rhs(self, loc: np.ndarray) -> np.ndarray:
        conc = {g: loc[i] for i, g in enumerate(self.gases)}
        cov = {s: loc[self.ng + j] for j, s in enumerate(self.surf)}
        rates = self.mech.rates(conc, cov)
        out = np.zeros_like(loc)
        for i, g in enumerate(self.gases):
            if g in rates:
                out[i] = -self.sign[i] * rates[g] * self.sink
        if rates:
            srates = self.mech.surface_rates(rates)
            for j, s in enumerate(self.surf):
                out[self.ng + j] = srates[s]
        return out

    def rhs(self, t, y):
        dy = self.big_a @ y
        if self.reactive.any():
            dy[self.local] += self._local_rhs(y[self.local])
        return dy

    def jac(self, t, y):
        loc = y[self.local]
        m = loc.size
        jl = np.zeros((m, m))
        base = self._local_rhs(loc)
        for k in range(m):
            step = 1e-7 * max(abs(loc[k]), 1e-3)
            pert = loc.copy()
            pert[k] += step
            jl[:, k] = (self._local_rhs(pert) - base) / step
        rows, cols = np.meshgrid(self.local, self.local, indexing="ij")
        local = sp.csr_matrix((jl.ravel(), (rows.ravel(), cols.ravel())), shape=(self.n_state, self.n_state))
        return (self.big_a + local).tocsc()


def simulate_pulse(config: ReactorConfig, mech: MechanismSpec) -> SimulationResult:
    """Integrate one pulse and return outlet fluxes plus exact thin-zone features."""
    system = _PulseSystem(config, mech)
    t_out = config.t_grid
    nc, ng = system.nc, system.ng
    pulse = _pulse_vector(config, system.vol)

    y0 = np.zeros(system.n_state)
    delayed = "CO" if mech.co_delay > 0 and "CO" in mech.pulsed else None
    for i, g in enumerate(system.gases):
        if g in mech.pulsed and g != delayed:
            y0[i * nc:(i + 1) * nc] = pulse

    segments = [(0.0, config.t_end)]
    if delayed:
        if mech.co_delay >= config.t_end:
            raise ValueError("co_delay must fall inside the simulated window")
        segments = [(0.0, mech.co_delay), (mech.co_delay, config.t_end)]

    ys = []
    stats = {"nfev": 0, "njev": 0, "nlu": 0}
    y_start = y0
    for k, (ta, tb) in enumerate(segments):
        last = k == len(segments) - 1
        sel = (t_out >= ta) & ((t_out <= tb) if last else (t_out < tb))
        t_eval = t_out[sel]
        if not last:
            t_eval = np.append(t_eval, tb)
        sol = solve_ivp(
            system.rhs,
            (ta, tb),
            y_start,
            method="BDF",
            t_eval=t_eval,
            jac=system.jac,
            rtol=config.rtol,
            atol=config.atol,
        )
        if not sol.success:
            raise SimulationError(
                f"integrator failed on [{ta}, {tb}] at t={sol.t[-1] if sol.t.size else ta}: {sol.message} "
                f"(rtol={config.rtol}, atol={config.atol}, nfev={sol.nfev})"
            )
        for key in stats:
            stats[key] += int(getattr(sol, key))
        y_seg = sol.y
        if not last:
            y_start = y_seg[:, -1].copy()
            y_seg = y_seg[:, :-1]
            i = system.gases.index(delayed)
            y_start[i * nc:(i + 1) * nc] += pulse
        ys.append(y_seg)
    y = np.hstack(ys)
    if y.shape[1] != t_out.size:
        raise SimulationError(f"integrator returned {y.shape[1]} samples, expected {t_out.size}")
    return _assemble(system, t_out, y, stats)


def _assemble(system: _PulseSystem, t: np.ndarray, y: np.ndarray, stats: dict) -> SimulationResult:
    config, mech = system.config, system.mech
    nc, ng = system.nc, system.ng
    conc_fields = {g: y[i * nc:(i + 1) * nc] for i, g in enumerate(system.gases)}

    peak = max(float(np.max(np.abs(c))) for c in conc_fields.values()) if conc_fields else 0.0
    neg_tol = 1e3 * config.atol + 10 * config.rtol * peak
    for g, c in conc_fields.items():
        worst = float(c.min())
        if worst < -neg_tol:
            raise SimulationError(f"negative concentration {worst:.3e} for {g} (tolerance {neg_tol:.1e})")

    cat = system.cat
    conc_cat = {g: c[cat] for g, c in conc_fields.items()}
    coverage = {s: y[ng * nc + j] for j, s in enumerate(system.surf)}
    rates = mech.rates(conc_cat, coverage)

    eps = config.porosity
    outlet = {g: config.diffusivity * c[-1] / config.h for g, c in conc_fields.items()}
    holdup = {g: eps * (system.vol @ c) for g, c in conc_fields.items()}

    features = {}
    zero = np.zeros_like(t)
    for g in system.gases:
        nu = -1.0 if g in mech.products else 1.0
        r = np.asarray(rates.get(g, zero), dtype=float)
        features[g] = TransientFeatures(
            gas_id=g,
            t=t,
            rate=r,
            concentration=conc_cat[g],
            uptake=compute_uptake([r], [nu], t),
            stoichiometry=(nu,),
        )

    defect = 0.0
    injected_total = config.pulse_moles * max(len(mech.pulsed), 1)
    for g in system.gases:
        injected = config.pulse_moles if g in mech.pulsed else 0.0
        exited = cumulative_trapezoid(outlet[g], t)[-1]
        balance = exited + holdup[g][-1] + features[g].uptake[-1] - injected
        defect = max(defect, abs(balance) / injected_total if injected_total > 0 else abs(balance))

    return SimulationResult(
        t=t,
        outlet_flux=outlet,
        features=features,
        coverage=coverage,
        gas_holdup=holdup,
        mass_balance_defect=float(defect),
        config=config,
        mechanism=mech,
        stats=stats,
    )


def standard_diffusion_curve(t: np.ndarray, config: ReactorConfig) -> np.ndarray:
    """Analytic inert outlet flux (mol/s) of a pulse at x=0 with a vacuum outlet at x=L.

    The alternating series is summed until a term falls below 1e-12 of the
    running sum; entries with t <= 0 are zero.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    tau = 1.0 / config.residence_time
    pref = config.pulse_moles * np.pi * tau
    out = np.zeros_like(t)
    for idx, ti in enumerate(t):
        if ti <= 0:
            continue
        total = 0.0
        n = 0
        while True:
            term = (-1) ** n * (2 * n + 1) * np.exp(-((n + 0.5) ** 2) * np.pi**2 * tau * ti)
            total += term
            if abs(term) < 1e-12 * abs(total) or n > 100000:
                break
            n += 1
        out[idx] = pref * total
    return out
