"""One-vs-rest linear learners: Perceptron, Passive-Aggressive (PA-I), hinge SGD and Ridge."""

from __future__ import annotations

import numpy as np
from numba import njit

from .base import Estimator, component_rng


@njit(cache=True)
def _dot(w, x, b):
    s = b
    for j in range(w.shape[0]):
        s += w[j] * x[j]
    return s


@njit(cache=True)
def _perceptron_epoch(X, t, order, w, b, lr):
    mistakes = 0
    for i in order:
        if t[i] * _dot(w, X[i], b[0]) <= 0.0:
            for j in range(w.shape[0]):
                w[j] += lr * t[i] * X[i, j]
            b[0] += lr * t[i]
            mistakes += 1
    return mistakes


@njit(cache=True)
def _pa_epoch(X, t, order, w, b, C):
    updates = 0
    for i in order:
        loss = 1.0 - t[i] * _dot(w, X[i], b[0])
        if loss > 0.0:
            sq = 1.0  # the intercept acts as a constant input
            for j in range(w.shape[0]):
                sq += X[i, j] * X[i, j]
            tau = min(C, loss / sq)
            for j in range(w.shape[0]):
                w[j] += tau * t[i] * X[i, j]
            b[0] += tau * t[i]
            updates += 1
    return updates


@njit(cache=True)
def _sgd_epoch(X, t, order, w, b, alpha, eta0, step):
    for i in order:
        step += 1
        eta = eta0 / np.sqrt(step)
        margin = t[i] * _dot(w, X[i], b[0])
        shrink = 1.0 - eta * alpha
        for j in range(w.shape[0]):
            w[j] *= shrink
        if margin < 1.0:
            for j in range(w.shape[0]):
                w[j] += eta * t[i] * X[i, j]
            b[0] += eta * t[i]
    return step


class _LinearOvR(Estimator):
    learned = ("coef_", "intercept_")

    def fit(self, X, y, n_classes):
        self.n_classes_ = n_classes
        X = np.ascontiguousarray(X, dtype=np.float64)
        d = X.shape[1]
        self.coef_ = np.zeros((n_classes, d))
        self.intercept_ = np.zeros(n_classes)
        for k in range(n_classes):
            t = np.where(y == k, 1.0, -1.0)
            w = np.zeros(d)
            b = np.zeros(1)
            self._fit_binary(X, t, w, b, component_rng(self.seed, k))
            self.coef_[k] = w
            self.intercept_[k] = b[0]
        return self

    def decision_function(self, X):
        return X @ self.coef_.T + self.intercept_


class Perceptron(_LinearOvR):
    name = "perceptron"
    defaults = {"learning_rate": 1.0, "max_epochs": 1000}

    def _fit_binary(self, X, t, w, b, rng):
        n = X.shape[0]
        for _ in range(self.params["max_epochs"]):
            if _perceptron_epoch(X, t, rng.permutation(n), w, b, float(self.params["learning_rate"])) == 0:
                break


class PassiveAggressive(_LinearOvR):
    name = "passive_aggressive"
    defaults = {"C": 1.0, "max_epochs": 100}

    def _fit_binary(self, X, t, w, b, rng):
        n = X.shape[0]
        for _ in range(self.params["max_epochs"]):
            if _pa_epoch(X, t, rng.permutation(n), w, b, float(self.params["C"])) == 0:
                break


class SGD(_LinearOvR):
    """Hinge loss with L2 penalty; step size ``eta0 / sqrt(t)`` over the global update count."""

    name = "sgd"
    defaults = {"alpha": 1e-4, "eta0": 0.1, "epochs": 50}

    def _fit_binary(self, X, t, w, b, rng):
        n = X.shape[0]
        step = 0
        for _ in range(self.params["epochs"]):
            step = _sgd_epoch(X, t, rng.permutation(n), w, b, float(self.params["alpha"]), float(self.params["eta0"]), step)


class Ridge(Estimator):
    """Closed-form ridge regression on +/-1 targets, one column per class.

    The intercept enters as an appended constant column that is not
    penalized.
    """

    name = "ridge"
    defaults = {"alpha": 1.0}
    learned = ("coef_", "intercept_")

    def fit(self, X, y, n_classes):
        self.n_classes_ = n_classes
        n, d = X.shape
        A = np.hstack([X, np.ones((n, 1))])
        T = np.where(y[:, None] == np.arange(n_classes)[None, :], 1.0, -1.0)
        penalty = np.full(d + 1, float(self.params["alpha"]))
        penalty[-1] = 0.0
        W = np.linalg.solve(A.T @ A + np.diag(penalty), A.T @ T)
        self.coef_ = W[:-1].T.copy()
        self.intercept_ = W[-1].copy()
        return self

    def decision_function(self, X):
        return X @ self.coef_.T + self.intercept_
