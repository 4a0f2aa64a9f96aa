from __future__ import annotations

from typing import Any, ClassVar

import numpy as np

from ..errors import ParameterError


def component_rng(seed: int, component: int) -> np.random.Generator:
    """PCG64 stream for one stochastic component, seeded by SeedSequence((seed, component))."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(component)])))


class Estimator:
    """Multiclass scorer over integer labels ``0..K-1``.

    Subclasses set ``defaults`` (hyperparameters) and ``learned`` (names of
    fitted attributes that make up the serializable state).
    """

    name: ClassVar[str] = ""
    defaults: ClassVar[dict[str, Any]] = {}
    learned: ClassVar[tuple[str, ...]] = ()

    def __init__(self, seed: int = 0, **params):
        unknown = set(params) - set(self.defaults)
        if unknown:
            raise ParameterError(f"{self.name}: unknown hyperparameters {sorted(unknown)}")
        self.seed = int(seed)
        self.params = {**self.defaults, **params}
        self.n_classes_ = 0

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int) -> "Estimator":
        raise NotImplementedError

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict(self, X: np.ndarray) -> np.ndarray:
        # argmax returns the first maximum, i.e. ties go to the smaller class index
        return np.argmax(self.decision_function(X), axis=1)

    # -- serialization --

    def _encode(self, name, value):
        return value

    def _decode(self, name, value):
        return value

    def get_state(self) -> dict:
        state = {"seed": self.seed, "params": dict(self.params), "n_classes": self.n_classes_}
        state["learned"] = {k: self._encode(k, getattr(self, k)) for k in self.learned}
        return state

    @classmethod
    def from_state(cls, state: dict) -> "Estimator":
        est = cls(seed=state["seed"], **state["params"])
        est.n_classes_ = int(state["n_classes"])
        for k, v in state["learned"].items():
            setattr(est, k, est._decode(k, v))
        return est


class ConstantEstimator(Estimator):
    """Stand-in when training data carries a single label."""

    name = "constant"
    learned = ()

    def fit(self, X, y, n_classes):
        self.n_classes_ = n_classes
        return self

    def decision_function(self, X):
        return np.zeros((X.shape[0], max(self.n_classes_, 1)))
