"""Ensembling of domain-adjacent fine-tuned classifiers.

Members are opaque probability producers; this package averages them
zero-shot, learns few-shot ensemble weights over them, scores
transferability, models computational cost, and verifies the ensemble
guarantees on synthetic model suites.
"""

from .core import (
    CostModel,
    EnsembleWeights,
    EvalReport,
    FewShotSet,
    LabelSpace,
    ModelDescriptor,
    OutputMapping,
    PredictionMatrix,
    Registry,
    map_outputs,
    validate_prediction_matrix,
)
from .ensemble import average_ensemble, decide, majority_vote, weighted_ensemble
from .learners import (
    LRConfig,
    RFConfig,
    RFModel,
    fit_lr,
    fit_rf,
    grid_oracle_weights,
    predict_rf,
)
from .metrics import LeepInputs, accuracy, brier, cost_of, cross_entropy, leep, relative_improvement

__version__ = "0.1.0"

__all__ = [
    "CostModel",
    "EnsembleWeights",
    "EvalReport",
    "FewShotSet",
    "LRConfig",
    "LabelSpace",
    "LeepInputs",
    "ModelDescriptor",
    "OutputMapping",
    "PredictionMatrix",
    "RFConfig",
    "RFModel",
    "Registry",
    "accuracy",
    "average_ensemble",
    "brier",
    "cost_of",
    "cross_entropy",
    "decide",
    "fit_lr",
    "fit_rf",
    "grid_oracle_weights",
    "leep",
    "majority_vote",
    "map_outputs",
    "predict_rf",
    "relative_improvement",
    "validate_prediction_matrix",
    "weighted_ensemble",
]
