"""Cooperative emission of Lambda-type emitters with a driven lower doublet.

Mean-field correlator equations for large ensembles, an exact master-equation
solver for up to four emitters, analysis helpers and a batch CLI.
"""
from .errors import (CapacityError, ComparisonFailure, ConfigError, IntegrationError,
                     InvariantViolation, LambdaSRError)
from .integrator import Tolerances, Trajectory, find_peaks, integrate
from .model import Geometry, ScaledParams, SystemParams, nondimensionalize, denormalize

__version__ = "0.1.0"
