"""Thin-zone TAP pulse simulation, rate-reactivity regression and RCD correlation analysis."""

__version__ = "0.1.0"

from .features import (
    RCDSeries,
    Role,
    TransientFeatures,
    Transform,
    compute_rcd,
    compute_uptake,
    extract_thin_zone_features,
    ingest_features,
)
from .mechanism import (
    CorrelationGrid,
    MechanismCall,
    RCDCMatrix,
    SweepKind,
    Verdict,
    classify_mechanism,
    grid_sweep_irreversible,
    grid_sweep_reversible,
    rcdc,
    robust_correlation,
)
from .reactor import (
    PRESETS,
    MechanismKind,
    MechanismSpec,
    ReactorConfig,
    SimulationError,
    SimulationResult,
    simulate_pulse,
    standard_diffusion_curve,
)
from .regress import (
    DesignMatrix,
    PenaltySpec,
    RegressionFit,
    SelectionMetrics,
    TermDescriptor,
    TermKind,
    build_design_matrix,
    compute_selection_metrics,
    cross_validate,
    fit_lasso,
    fit_mechanism_line,
    fit_ols,
    fit_scad,
    scad_threshold,
)
