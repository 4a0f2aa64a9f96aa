"""The eleven benchmarked classifiers behind one train/predict interface."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..errors import DataError, FitError, ParameterError, ShapeError
from .base import ConstantEstimator, Estimator, component_rng
from .ensemble import AdaBoost, Bagging, GradientBoosting, RandomForest
from .knn import KNN
from .linear import SGD, PassiveAggressive, Perceptron, Ridge
from .svm import SVM
from .tree import DecisionTree

# report row order, keyed by the CLI name
ALGORITHMS: dict[str, type[Estimator]] = {
    "adaboost": AdaBoost,
    "bagging": Bagging,
    "decision_tree": DecisionTree,
    "gradient_boosting": GradientBoosting,
    "knn": KNN,
    "perceptron": Perceptron,
    "passive_aggressive": PassiveAggressive,
    "random_forest": RandomForest,
    "ridge": Ridge,
    "sgd": SGD,
    "svm": SVM,
}

DISPLAY_NAMES = {
    "adaboost": "AdaBoost",
    "bagging": "Bagging",
    "decision_tree": "Decision Tree",
    "gradient_boosting": "Gradient Boosting",
    "knn": "KNN",
    "perceptron": "Perceptron",
    "passive_aggressive": "Passive Aggressive",
    "random_forest": "Random Forest",
    "ridge": "Ridge",
    "sgd": "SGD",
    "svm": "SVM",
}

_ESTIMATORS = {cls.name: cls for cls in (*ALGORITHMS.values(), ConstantEstimator)}


def canonical_name(name: str) -> str:
    key = name.strip().lower().replace("-", "_").replace(" ", "_")
    aliases = {"tree": "decision_tree", "dt": "decision_tree", "gb": "gradient_boosting", "rf": "random_forest",
               "pa": "passive_aggressive"}
    key = aliases.get(key, key)
    if key not in ALGORITHMS:
        for k, display in DISPLAY_NAMES.items():
            if display.lower() == name.strip().lower():
                return k
        raise ParameterError(f"unknown classifier {name!r}; choose from {', '.join(ALGORITHMS)}")
    return key


@dataclass(frozen=True)
class ClassifierSpec:
    algorithm: str
    params: dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "algorithm", canonical_name(self.algorithm))
        unknown = set(self.params) - set(ALGORITHMS[self.algorithm].defaults)
        if unknown:
            raise ParameterError(f"{self.algorithm}: unknown hyperparameters {sorted(unknown)}")

    @property
    def display_name(self) -> str:
        return DISPLAY_NAMES[self.algorithm]


def default_specs(seed: int = 0) -> list[ClassifierSpec]:
    return [ClassifierSpec(name, seed=seed) for name in ALGORITHMS]


@dataclass
class TrainedModel:
    algorithm: str
    classes: tuple  # training labels in class-index order
    n_features: int
    estimator: Estimator

    def get_state(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "classes": list(self.classes),
            "n_features": self.n_features,
            "estimator": self.estimator.name,
            "state": self.estimator.get_state(),
        }

    @classmethod
    def from_state(cls, state: dict) -> "TrainedModel":
        est = _ESTIMATORS[state["estimator"]].from_state(state["state"])
        return cls(state["algorithm"], tuple(state["classes"]), int(state["n_features"]), est)


def _check_X(X, n_features=None):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {X.shape}")
    if n_features is not None and X.shape[1] != n_features:
        raise ShapeError(f"model expects {n_features} features, got {X.shape[1]}")
    if np.isnan(X).any():
        raise DataError("input contains NaN")
    return X


def train(spec: ClassifierSpec, X, y) -> TrainedModel:
    X = _check_X(X)
    y = np.asarray(y)
    if X.shape[0] == 0 or X.shape[1] == 0:
        raise FitError("cannot train on empty data")
    if y.shape[0] != X.shape[0]:
        raise ShapeError(f"{X.shape[0]} rows but {y.shape[0]} labels")
    classes, y_idx = np.unique(y, return_inverse=True)
    y_idx = y_idx.astype(np.int64)
    if len(classes) == 1:
        est: Estimator = ConstantEstimator(seed=spec.seed).fit(X, y_idx, 1)
    else:
        est = ALGORITHMS[spec.algorithm](seed=spec.seed, **spec.params).fit(X, y_idx, len(classes))
    return TrainedModel(spec.algorithm, tuple(classes.tolist()), X.shape[1], est)


def decision_scores(model: TrainedModel, X) -> np.ndarray:
    """Per-class scores, shape (m, K); row argmax is the prediction."""
    X = _check_X(X, model.n_features)
    return model.estimator.decision_function(X)


def predict_indices(model: TrainedModel, X) -> np.ndarray:
    return np.argmax(decision_scores(model, X), axis=1)


def predict(model: TrainedModel, X) -> np.ndarray:
    return np.asarray(model.classes, dtype=object)[predict_indices(model, X)]


__all__ = [
    "ALGORITHMS",
    "DISPLAY_NAMES",
    "ClassifierSpec",
    "TrainedModel",
    "canonical_name",
    "component_rng",
    "decision_scores",
    "default_specs",
    "predict",
    "predict_indices",
    "train",
]
