"""Kalman-Bucy state and drift estimation for the stochastic heat equation."""

from heatdrift._backend import BACKEND
from heatdrift.errors import FitError, InstabilityError, ParameterError, TruncationError
from heatdrift.spectral import DriftTruth, ModelConfig, PriorSpec, make_truth, prior_variance, synthesize

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DriftTruth",
    "FitError",
    "InstabilityError",
    "ModelConfig",
    "ParameterError",
    "PriorSpec",
    "TruncationError",
    "make_truth",
    "prior_variance",
    "synthesize",
]
