"""Numerical verification of multicritical circle map geometry."""

from .core import CircleInterval, PrecisionPolicy
from .maps import CriticalPoint, MapSpec, Term, validate_homeomorphism
from .rotation import RotationData, RotationTarget, tune_map, tune_parameter

__all__ = [
    "CircleInterval",
    "CriticalPoint",
    "MapSpec",
    "PrecisionPolicy",
    "RotationData",
    "RotationTarget",
    "Term",
    "tune_map",
    "tune_parameter",
    "validate_homeomorphism",
]

__version__ = "0.1.0"
