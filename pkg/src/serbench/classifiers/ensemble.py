"""Tree ensembles: bagging, random forest, SAMME AdaBoost and gradient boosting."""

from __future__ import annotations

import numpy as np

from .base import Estimator, component_rng
from .tree import Tree, build_classification_tree, build_regression_tree


class _TreeListMixin:
    def _encode(self, name, value):
        if name == "trees_":
            return [t.to_state() for t in value]
        return value

    def _decode(self, name, value):
        if name == "trees_":
            return [Tree.from_state(t) for t in value]
        return value


class _VotingForest(_TreeListMixin, Estimator):
    """Bootstrap CART trees combined by majority vote; scores are vote counts."""

    learned = ("trees_",)

    def _max_features(self, d):
        return None

    def fit(self, X, y, n_classes):
        self.n_classes_ = n_classes
        n, d = X.shape
        self.trees_ = []
        for i in range(self.params["n_estimators"]):
            rng = component_rng(self.seed, i)
            boot = rng.integers(0, n, size=n)
            self.trees_.append(
                build_classification_tree(X[boot], y[boot], n_classes, max_features=self._max_features(d), rng=rng)
            )
        return self

    def decision_function(self, X):
        votes = np.zeros((X.shape[0], self.n_classes_))
        rows = np.arange(X.shape[0])
        for tree in self.trees_:
            votes[rows, np.argmax(tree.predict_value(X), axis=1)] += 1
        return votes


class Bagging(_VotingForest):
    name = "bagging"
    defaults = {"n_estimators": 10}


class RandomForest(_VotingForest):
    name = "random_forest"
    defaults = {"n_estimators": 100}

    def _max_features(self, d):
        return max(1, int(np.sqrt(d)))


class AdaBoost(_TreeListMixin, Estimator):
    """SAMME with depth-1 Gini stumps."""

    name = "adaboost"
    defaults = {"n_estimators": 50, "learning_rate": 1.0}
    learned = ("trees_", "alphas_", "errors_", "prior_")

    def fit(self, X, y, n_classes):
        self.n_classes_ = K = n_classes
        n = X.shape[0]
        w = np.full(n, 1.0 / n)
        self.trees_, alphas, errors = [], [], []
        self.prior_ = np.bincount(y, minlength=K) / n
        for _ in range(self.params["n_estimators"]):
            stump = build_classification_tree(X, y, K, sample_weight=w, max_depth=1)
            miss = np.argmax(stump.predict_value(X), axis=1) != y
            err = float(np.sum(w[miss]) / np.sum(w))
            if err >= 1.0 - 1.0 / K:
                break
            if err <= 0.0:
                self.trees_.append(stump)
                alphas.append(1.0)
                errors.append(0.0)
                break
            alpha = self.params["learning_rate"] * (np.log((1.0 - err) / err) + np.log(K - 1.0))
            self.trees_.append(stump)
            alphas.append(alpha)
            errors.append(err)
            w = w * np.exp(alpha * miss)
            w /= w.sum()
        self.alphas_ = np.array(alphas)
        self.errors_ = np.array(errors)
        return self

    def decision_function(self, X):
        if not self.trees_:
            # no stump beat chance: fall back to the training class prior
            return np.tile(self.prior_, (X.shape[0], 1))
        scores = np.zeros((X.shape[0], self.n_classes_))
        rows = np.arange(X.shape[0])
        for tree, alpha in zip(self.trees_, self.alphas_):
            scores[rows, np.argmax(tree.predict_value(X), axis=1)] += alpha
        return scores


def _softmax(F):
    z = F - F.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class GradientBoosting(_TreeListMixin, Estimator):
    """Multinomial deviance boosting; one depth-limited regression tree per class per stage."""

    name = "gradient_boosting"
    defaults = {"n_estimators": 100, "learning_rate": 0.1, "max_depth": 3}
    learned = ("trees_", "init_")

    def fit(self, X, y, n_classes):
        self.n_classes_ = K = n_classes
        n = X.shape[0]
        Y = np.zeros((n, K))
        Y[np.arange(n), y] = 1.0
        prior = np.clip(Y.mean(axis=0), 1e-12, None)
        self.init_ = np.log(prior)
        F = np.tile(self.init_, (n, 1))
        order = np.argsort(X, axis=0, kind="stable")
        lr = self.params["learning_rate"]
        self.trees_ = []  # stage-major: trees_[stage * K + k]
        for _ in range(self.params["n_estimators"]):
            P = _softmax(F)
            for k in range(K):
                resid = Y[:, k] - P[:, k]
                tree, leaf_of = build_regression_tree(X, resid, self.params["max_depth"], order)
                for leaf in np.unique(leaf_of):
                    r = resid[leaf_of == leaf]
                    den = np.sum(np.abs(r) * (1.0 - np.abs(r)))
                    tree.value[leaf] = 0.0 if den < 1e-150 else (K - 1.0) / K * r.sum() / den
                F[:, k] += lr * tree.value[leaf_of]
                self.trees_.append(tree)
        return self

    def staged_decision_function(self, X):
        """Yield the raw scores after each stage."""
        K = self.n_classes_
        F = np.tile(self.init_, (X.shape[0], 1))
        lr = self.params["learning_rate"]
        for s in range(len(self.trees_) // K):
            for k in range(K):
                F[:, k] += lr * self.trees_[s * K + k].predict_value(X)
            yield F.copy()

    def decision_function(self, X):
        K = self.n_classes_
        F = np.tile(self.init_, (X.shape[0], 1))
        lr = self.params["learning_rate"]
        for i, tree in enumerate(self.trees_):
            F[:, i % K] += lr * tree.predict_value(X)
        return F
