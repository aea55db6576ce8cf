"""Direct and inverse scattering for the semilinear Helmholtz equation Lap u + a(x, u) + k^2 u = 0."""

from .errors import (
    AnalyticityError,
    ConfigError,
    DivergenceError,
    DomainError,
    GateError,
    IllPosedError,
    MissingRecordsError,
    ResonanceError,
    SemiscatError,
)
from .fields import ComplexField, FarField, HerglotzDensity, far_field_of_source, herglotz_wave, volume_potential
from .forward import SolveReport, apply_Tq, apply_TqH, scattered_far_field, solve_linear_total, solve_nonlinear
from .geometry import build_directions, build_disk_grid
from .inverse import ReconstructionResult, dense_range_probe, recover_all, recover_first_order, recover_higher_order
from .linearize import ExperimentPlan, ScatteringDataset, first_order_farfield, mixed_derivative, synthesize_dataset
from .nonlinearity import NonlinearityModel, validate_assumption
from .specfun import WaveContext, bessel_j0, bessel_y0, hankel0

__version__ = "0.1.0"

__all__ = [
    "AnalyticityError",
    "ComplexField",
    "ConfigError",
    "DivergenceError",
    "DomainError",
    "ExperimentPlan",
    "FarField",
    "GateError",
    "HerglotzDensity",
    "IllPosedError",
    "MissingRecordsError",
    "NonlinearityModel",
    "ReconstructionResult",
    "ResonanceError",
    "ScatteringDataset",
    "SemiscatError",
    "SolveReport",
    "WaveContext",
    "apply_Tq",
    "apply_TqH",
    "bessel_j0",
    "bessel_y0",
    "build_directions",
    "build_disk_grid",
    "dense_range_probe",
    "far_field_of_source",
    "first_order_farfield",
    "hankel0",
    "herglotz_wave",
    "mixed_derivative",
    "recover_all",
    "recover_first_order",
    "recover_higher_order",
    "scattered_far_field",
    "solve_linear_total",
    "solve_nonlinear",
    "synthesize_dataset",
    "validate_assumption",
    "volume_potential",
]
