"""Maslov-type indices of brake symplectic paths and brake orbit certification."""
from __future__ import annotations

__version__ = "0.1.0"

from .errors import BrakeIndexError, ConfigParse, DegenerateCrossing, NumericalError
from .index_engine import IndexReport, L0, L0xL1, L1, L1xL0, PERIODIC, index_suite, maslov, nullities
from .iteration import VerificationReport, brake_iterate, tilde_shift, verify_all
from .matrizant import CoefficientPath, SymplecticPath, constant_path, matrizant, sample_coefficient_path, trig_path
from .symcore import Tolerances, signature

__all__ = [
    "BrakeIndexError", "ConfigParse", "DegenerateCrossing", "NumericalError",
    "IndexReport", "L0", "L0xL1", "L1", "L1xL0", "PERIODIC", "index_suite", "maslov", "nullities",
    "VerificationReport", "brake_iterate", "tilde_shift", "verify_all",
    "CoefficientPath", "SymplecticPath", "constant_path", "matrizant", "sample_coefficient_path", "trig_path",
    "Tolerances", "signature",
]
