"""Data-driven learners with a shared multi-output fit/predict contract."""

from __future__ import annotations

from ._training import FitReport, TrainConfig, check_x
from .ffnn import FfnnConfig, FfnnModel, ffnn_finetune, ffnn_fit, init_model, loss_and_gradient
from .forest import ForestConfig, ForestModel, Tree, rf_fit, rf_warmstart_extend
from .io import load_model, save_model
from .linear import LinearModel, lr_finetune, lr_fit

Learner = LinearModel | FfnnModel | ForestModel

LEARNER_KINDS = ("lr", "ffnn", "rf")


def predict(model: Learner, X):
    """Evaluate any fitted learner; raises on a feature-count mismatch."""
    X = check_x(X, model.n_features)
    return model.predict(X)


def learner_kind(model: Learner) -> str:
    if isinstance(model, LinearModel):
        return "lr"
    if isinstance(model, FfnnModel):
        return "ffnn"
    if isinstance(model, ForestModel):
        return "rf"
    raise TypeError(f"not a learner: {type(model).__name__}")


__all__ = [
    "FitReport",
    "TrainConfig",
    "FfnnConfig",
    "FfnnModel",
    "ForestConfig",
    "ForestModel",
    "LinearModel",
    "Learner",
    "LEARNER_KINDS",
    "Tree",
    "ffnn_fit",
    "ffnn_finetune",
    "init_model",
    "learner_kind",
    "load_model",
    "loss_and_gradient",
    "lr_fit",
    "lr_finetune",
    "predict",
    "rf_fit",
    "rf_warmstart_extend",
    "save_model",
]
