"""Finite measurement scenarios, empirical models and their quantum and lattice-net realizations."""

from importlib.resources import files

from .distribution import BOOLEAN, PROBABILITY, REAL, Distribution
from .empirical import EmpiricalModel, find_local_model, is_no_signalling, rationalize
from .scenario import Assignment, MeasurementScenario
from .verdict import Verdict

__version__ = "0.1.0"


def fixture_path(name: str):
    """Path to a shipped fixture document such as ``"prbox.model"``."""
    return files(__name__) / "fixtures" / name


__all__ = [
    "Assignment", "MeasurementScenario", "Distribution", "EmpiricalModel", "Verdict",
    "PROBABILITY", "BOOLEAN", "REAL", "find_local_model", "is_no_signalling", "rationalize",
    "fixture_path",
]
