"""Gait-disorder classification from ground-contact-force recordings.

Pipeline: ingest 8-channel GCF trials, segment gait cycles, detect
data-driven gait phases, extract a 21-dimensional feature vector per
trial, then train jointly-regularized classifiers (multiplicative
multi-task feature learning) for PD-vs-healthy, stroke-vs-healthy and
stroke-vs-PD discrimination, with an evaluation harness (AUC, repeated
partitions, leave-one-subject-out) and synthetic generators for
validation.
"""

__version__ = "0.1.0"

from .data import Subject, Trial, normalize_by_weight, parse_trial, validate_trial
from .errors import (
    DomainError,
    EmptyInputError,
    GaitError,
    NumericalError,
    ParseError,
    TrialRejected,
    ValidationError,
)
from .features import FEATURE_NAMES, Dataset, FeatureVector
from .solver import (
    MmtflModel,
    RegularizerSpec,
    StlModel,
    TaskData,
    fit_mmtfl,
    fit_stl,
    predict,
)

__all__ = [
    "__version__",
    "Subject",
    "Trial",
    "parse_trial",
    "normalize_by_weight",
    "validate_trial",
    "FEATURE_NAMES",
    "Dataset",
    "FeatureVector",
    "TaskData",
    "RegularizerSpec",
    "MmtflModel",
    "StlModel",
    "fit_mmtfl",
    "fit_stl",
    "predict",
    "GaitError",
    "ParseError",
    "EmptyInputError",
    "ValidationError",
    "DomainError",
    "TrialRejected",
    "NumericalError",
]
