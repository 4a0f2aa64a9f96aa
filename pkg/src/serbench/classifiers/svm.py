"""RBF-kernel SVM trained by SMO with maximal-violating-pair selection, one-vs-rest."""

from __future__ import annotations

import numpy as np
from numba import njit

from .base import Estimator

# train sets up to this size get a precomputed Gram matrix; larger ones compute rows on demand
FULL_KERNEL_MAX = 4000
TAU = 1e-12


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A**2).sum(axis=1)[:, None] + (B**2).sum(axis=1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@njit(cache=True)
def _kernel_row(X, sqn, gamma, i, out):
    n, d = X.shape
    for t in range(n):
        s = 0.0
        for j in range(d):
            s += X[i, j] * X[t, j]
        v = sqn[i] + sqn[t] - 2.0 * s
        out[t] = np.exp(-gamma * max(v, 0.0))


@njit(cache=True)
def _smo(K, X, sqn, gamma, y, C, tol, max_iter):
    """Solve the binary dual; returns (alpha, rho, iterations, gap)."""
    n = y.shape[0]
    full = K.shape[0] == n
    alpha = np.zeros(n)
    G = -np.ones(n)
    Ki = np.empty(n)
    Kj = np.empty(n)
    gap = np.inf
    it = 0
    while it < max_iter:
        # maximal violating pair
        gmax = -np.inf
        gmin = np.inf
        i = -1
        j = -1
        for t in range(n):
            v = -y[t] * G[t]
            up = (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0)
            low = (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < C)
            if up and v > gmax:
                gmax = v
                i = t
            if low and v < gmin:
                gmin = v
                j = t
        gap = gmax - gmin
        if i < 0 or j < 0 or gap < tol:
            break
        if full:
            for t in range(n):
                Ki[t] = K[i, t]
                Kj[t] = K[j, t]
        else:
            _kernel_row(X, sqn, gamma, i, Ki)
            _kernel_row(X, sqn, gamma, j, Kj)
        ai_old = alpha[i]
        aj_old = alpha[j]
        if y[i] != y[j]:
            quad = Ki[i] + Kj[j] - 2.0 * Ki[j]
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = Ki[i] + Kj[j] - 2.0 * Ki[j]
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total
        dai = alpha[i] - ai_old
        daj = alpha[j] - aj_old
        for t in range(n):
            G[t] += y[t] * (y[i] * Ki[t] * dai + y[j] * Kj[t] * daj)
        it += 1

    # rho: mean of y*G over free vectors, else midpoint of the feasible interval
    ub = np.inf
    lb = -np.inf
    s = 0.0
    nfree = 0
    for t in range(n):
        yg = y[t] * G[t]
        if alpha[t] >= C:
            if y[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0:
            if y[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            s += yg
            nfree += 1
    rho = s / nfree if nfree > 0 else (ub + lb) / 2.0
    return alpha, rho, it, gap


class SVM(Estimator):
    """OvR binary SVMs on an RBF kernel; ``gamma`` defaults to ``1 / (d * Var(X))``."""

    name = "svm"
    defaults = {"C": 1.0, "gamma": None, "tol": 1e-3, "max_passes": 1000}
    learned = ("gamma_", "support_", "dual_coef_", "rho_", "gaps_")

    def fit(self, X, y, n_classes):
        self.n_classes_ = n_classes
        X = np.ascontiguousarray(X, dtype=np.float64)
        n, d = X.shape
        gamma = self.params["gamma"]
        if gamma is None:
            var = X.var()
            gamma = 1.0 / (d * var) if var > 0 else 1.0
        self.gamma_ = float(gamma)
        sqn = (X**2).sum(axis=1)
        K = rbf_kernel(X, X, self.gamma_) if n <= FULL_KERNEL_MAX else np.empty((0, 0))
        max_iter = int(self.params["max_passes"]) * n
        coef = np.zeros((n, n_classes))
        rho = np.zeros(n_classes)
        gaps = np.zeros(n_classes)
        self.alphas_ = np.zeros((n_classes, n))
        for k in range(n_classes):
            t = np.where(y == k, 1.0, -1.0)
            alpha, rho[k], _, gaps[k] = _smo(
                K, X, sqn, self.gamma_, t, float(self.params["C"]), float(self.params["tol"]), max_iter
            )
            self.alphas_[k] = alpha
            coef[:, k] = alpha * t
        keep = np.nonzero(np.any(coef != 0.0, axis=1))[0]
        self.support_ = X[keep]
        self.dual_coef_ = coef[keep]
        self.rho_ = rho
        self.gaps_ = gaps
        return self

    def decision_function(self, X):
        if self.support_.shape[0] == 0:
            return np.tile(-self.rho_, (X.shape[0], 1))
        return rbf_kernel(np.asarray(X, dtype=np.float64), self.support_, self.gamma_) @ self.dual_coef_ - self.rho_
