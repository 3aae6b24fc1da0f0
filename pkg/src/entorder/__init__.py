"""Entanglement measures on two-qubit states and ordering-violation witnesses."""

from .errors import EntorderError
from .measures import MeasureId, MeasureValue, OptimizerConfig, evaluate
from .ordering import random_search, same_order, sandwich_construct, witness_from_gap
from .states import DensityMatrix, PureState, SeedSpec, validate

__version__ = "0.1.0"

__all__ = [
    "DensityMatrix",
    "EntorderError",
    "MeasureId",
    "MeasureValue",
    "OptimizerConfig",
    "PureState",
    "SeedSpec",
    "evaluate",
    "random_search",
    "same_order",
    "sandwich_construct",
    "validate",
    "witness_from_gap",
]
