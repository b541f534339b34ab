"""Body-attitude alignment on SO(n): coefficients, sampling, particles and fields."""

from .coefficients import (
    CoefficientTable,
    c1,
    closed_form_n3,
    coefficients_trace_moments,
    coefficients_weyl,
    partition_function,
)
from .exceptions import (
    DegenerateESS,
    DimensionMismatch,
    InternalMismatch,
    NoConvergence,
    NonUniqueProjection,
    ProjectionError,
    SingularProjection,
    SOHBError,
)
from .son import RotationProjector, haar_sample, matrix_inner, project_to_rotation
from .von_mises import VonMises, VonMisesEstimator, mc_expectation
from .weyl import integrate_class_function

__all__ = [
    "CoefficientTable",
    "DegenerateESS",
    "DimensionMismatch",
    "InternalMismatch",
    "NoConvergence",
    "NonUniqueProjection",
    "ProjectionError",
    "RotationProjector",
    "SOHBError",
    "SingularProjection",
    "VonMises",
    "VonMisesEstimator",
    "c1",
    "closed_form_n3",
    "coefficients_trace_moments",
    "coefficients_weyl",
    "haar_sample",
    "integrate_class_function",
    "matrix_inner",
    "mc_expectation",
    "partition_function",
    "project_to_rotation",
]
