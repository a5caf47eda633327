from .likelihood import (
    ENUMERATION_CAP,
    ConfigurationSpace,
    EnumerationCapError,
    LogLREstimate,
    hamiltonian,
    log_lr_exact,
    log_lr_exact_batch,
    log_lr_mc,
)
from .observation import Observation, sample_observation
from .overlaps import ConvergenceError, GibbsParams, OverlapStats, overlap_moments

__all__ = [
    "ENUMERATION_CAP",
    "ConfigurationSpace",
    "ConvergenceError",
    "EnumerationCapError",
    "GibbsParams",
    "LogLREstimate",
    "Observation",
    "OverlapStats",
    "hamiltonian",
    "log_lr_exact",
    "log_lr_exact_batch",
    "log_lr_mc",
    "overlap_moments",
    "sample_observation",
]
