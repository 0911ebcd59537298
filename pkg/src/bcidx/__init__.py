"""Influence-driven explanations for discrete Bayesian network classifiers."""

from .errors import (
    AttributionUnavailable,
    BCIDXError,
    BudgetExceeded,
    DataError,
    DegenerateDistribution,
    DomainError,
    IncompleteInput,
    KitError,
    ModelError,
    UnknownVariable,
)
from .idx import IDX, generate, validate
from .influence import InfluenceGraph, coincide, influences, io_influences
from .kits import ExplanationKit, PosteriorOracle, RelationType, make_kit
from .model import (
    CLASSIFICATION,
    OBSERVATION,
    Classifier,
    Posterior,
    Variable,
    decide,
    modified_input,
    posterior,
    predict_all,
)

__version__ = "0.1.0"

__all__ = [
    "AttributionUnavailable",
    "BCIDXError",
    "BudgetExceeded",
    "CLASSIFICATION",
    "Classifier",
    "DataError",
    "DegenerateDistribution",
    "DomainError",
    "ExplanationKit",
    "IDX",
    "IncompleteInput",
    "InfluenceGraph",
    "KitError",
    "ModelError",
    "OBSERVATION",
    "Posterior",
    "PosteriorOracle",
    "RelationType",
    "UnknownVariable",
    "Variable",
    "coincide",
    "decide",
    "generate",
    "influences",
    "io_influences",
    "make_kit",
    "modified_input",
    "posterior",
    "predict_all",
    "validate",
]
