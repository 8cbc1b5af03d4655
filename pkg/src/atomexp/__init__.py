"""Commuting-operator models, conditional expectations, steering assemblages and tensorization."""

from .condexp import (
    ConditionalExpectation,
    apply,
    expectation_onto,
    predual_apply,
    verify_sandwich,
)
from .generators import gen
from .matrixlab import DEFAULT_TOL, Tolerances
from .pipeline import PipelineReport, run_pipeline
from .scenario import (
    Behavior,
    BipartiteModel,
    MeasurementScenario,
    POVMFamily,
    behavior,
    chsh_value,
    validate_model,
)
from .steering import (
    SteeringAssemblage,
    build_assemblage,
    verify_reproduction,
    verify_x_independence,
)
from .tensorize import TensorModel, tensorize, verify_tensor_model
from .vnalg import (
    VNAlgebra,
    WedderburnData,
    center,
    commutant,
    generated_algebra,
    minimal_central_projections,
    minimal_projection_resolution,
    wedderburn,
)

__all__ = [
    "ConditionalExpectation",
    "apply",
    "expectation_onto",
    "predual_apply",
    "verify_sandwich",
    "Behavior",
    "BipartiteModel",
    "MeasurementScenario",
    "POVMFamily",
    "behavior",
    "chsh_value",
    "validate_model",
    "SteeringAssemblage",
    "build_assemblage",
    "verify_reproduction",
    "verify_x_independence",
    "VNAlgebra",
    "WedderburnData",
    "center",
    "commutant",
    "generated_algebra",
    "minimal_central_projections",
    "minimal_projection_resolution",
    "wedderburn",
    "gen",
    "DEFAULT_TOL",
    "Tolerances",
    "PipelineReport",
    "run_pipeline",
    "TensorModel",
    "tensorize",
    "verify_tensor_model",
]

__version__ = "0.1.0"
