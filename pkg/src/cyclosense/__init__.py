"""Cyclostationary spectrum sensing and signal identification at desk scale."""

from .errors import CycloSenseError, FormatError, InvalidInput, NumericalError, ShapeError
from .waveform import ComplexSignal, WaveformClass
from .scf import FamConfig, ScfMatrix, compute_scf
from .features import FeatureKind, FeatureMatrix

__version__ = "0.1.0"

__all__ = [
    "CycloSenseError",
    "FormatError",
    "InvalidInput",
    "NumericalError",
    "ShapeError",
    "ComplexSignal",
    "WaveformClass",
    "FamConfig",
    "ScfMatrix",
    "compute_scf",
    "FeatureKind",
    "FeatureMatrix",
]
