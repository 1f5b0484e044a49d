"""Spatial decay of speech in open-plan offices, with uncertainty estimates.

Single-number quantities (D_2S, L_pAS4m, r_c) from a measurement path, a
closed-form uncertainty budget, Monte-Carlo emulation of full measurements,
synthetic office fields and multi-path pooling.
"""
from .analytic import (
    DistanceErrorModel,
    OctaveUncertaintyTable,
    UncertaintyBudget,
    analytic_budget,
    budget_from_levels,
    level_uncertainties,
    level_uncertainty,
    propagate_jacobian,
    round_up_tenth,
    snq_partials,
)
from .area import PathResult, overlap_test, pool_area, pool_samples, unicity_report
from .core import (
    MeasurementArea,
    MeasurementPath,
    MeasurementPosition,
    OctaveSpectrum,
    SnqSet,
    a_weighted_level,
    compute_snq,
    validate_path,
)
from .exceptions import (
    DegenerateGeometry,
    FieldDomainError,
    InfeasibleSpec,
    InsufficientPaths,
    InsufficientSamples,
    NotConverged,
    ParseError,
    SpatialDecayError,
    ValidationError,
    ZeroDecay,
)
from .fields import (
    GridField,
    LevelStep,
    LogLinearField,
    OfficeConfigSpec,
    default_geometry,
    grid_from_loglinear,
    near_source_gradients,
    synth_office,
)
from .montecarlo import McConfig, McErrorModel, McResult, check_normality, emulate_measurement, run_mc

__version__ = "0.1.0"
