"""Barrier-Lyapunov model reference adaptive control with state, input and rate limits."""

from ._accel import BACKEND
from .errors import (
    BarrierBreachError,
    BLFMRACError,
    InfeasibilityError,
    InvalidInputError,
    NumericalFailureError,
    ScenarioError,
    StepFailureError,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BLFMRACError",
    "BarrierBreachError",
    "InfeasibilityError",
    "InvalidInputError",
    "NumericalFailureError",
    "ScenarioError",
    "StepFailureError",
]
