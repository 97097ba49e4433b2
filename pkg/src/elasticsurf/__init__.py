"""Elastic shape registration of surfaces parametrized over the unit square.

Surface 1 is rotated and surface 2 reparametrized; the squared elastic
distance is the minimized L2 energy between their square-root normal fields.
"""
from .basis import BasisElement, Family, SampledBasis, Slot, build_basis
from .dp import DpConfig, DpResult, dp_partial_registration
from .driver import InitMode, RegistrationResult, RunConfig, emit_outputs, run_registration
from .gradient import (
    GradientField,
    StepReport,
    StepSafetyError,
    TangentField,
    apply_step,
    assemble_gradient,
    compose,
    directional_derivative,
    max_safe_step,
)
from .grid import (
    GridPartition,
    SurfaceFileError,
    SurfaceSample,
    approximate_area,
    bilinear_sample,
    finite_difference_partials,
    load_surface,
    normalize_unit_area,
    quadrature_weights,
    scale_partition,
)
from .rotation import optimal_rotation
from .shape import (
    DiffeoField,
    OrientationError,
    ShapeField,
    compute_shape_field,
    group_action,
    l2_distance,
    l2_inner,
    l2_norm_sq,
    registration_energy,
)
from .zoo import GammaSpec, Kind, SurfaceSpec, generate, perturb

__version__ = "0.1.0"

__all__ = [
    "BasisElement",
    "DiffeoField",
    "DpConfig",
    "DpResult",
    "Family",
    "GammaSpec",
    "GradientField",
    "GridPartition",
    "InitMode",
    "Kind",
    "OrientationError",
    "RegistrationResult",
    "RunConfig",
    "SampledBasis",
    "ShapeField",
    "Slot",
    "StepReport",
    "StepSafetyError",
    "SurfaceFileError",
    "SurfaceSample",
    "SurfaceSpec",
    "TangentField",
    "apply_step",
    "approximate_area",
    "assemble_gradient",
    "bilinear_sample",
    "build_basis",
    "compose",
    "compute_shape_field",
    "directional_derivative",
    "dp_partial_registration",
    "emit_outputs",
    "finite_difference_partials",
    "generate",
    "group_action",
    "l2_distance",
    "l2_inner",
    "l2_norm_sq",
    "load_surface",
    "max_safe_step",
    "normalize_unit_area",
    "optimal_rotation",
    "perturb",
    "quadrature_weights",
    "registration_energy",
    "run_registration",
    "scale_partition",
]
