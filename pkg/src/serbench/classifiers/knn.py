from __future__ import annotations

import numpy as np

from .base import Estimator

# upper bound on the (queries x train x dims) block materialized per chunk
_CHUNK_ELEMS = 4_000_000


def squared_distances(Q: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Exact ``sum((q - t)**2)`` for every query/train pair, computed in chunks."""
    n, d = T.shape
    out = np.empty((Q.shape[0], n))
    step = max(1, _CHUNK_ELEMS // max(1, n * d))
    for s in range(0, Q.shape[0], step):
        diff = Q[s : s + step, None, :] - T[None, :, :]
        out[s : s + step] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


class KNN(Estimator):
    """Brute-force Euclidean k-nearest-neighbours with majority vote.

    Training rows are stored in canonical (lexicographic) order, so distance
    ties break by that order and predictions do not depend on how the
    training rows were permuted. Vote ties go to the smaller class index.
    """

    name = "knn"
    defaults = {"k": 5}
    learned = ("X_", "y_")

    def fit(self, X, y, n_classes):
        self.n_classes_ = n_classes
        keys = np.column_stack([X, y]).T[::-1]
        canon = np.lexsort(keys)
        self.X_ = np.ascontiguousarray(X[canon], dtype=np.float64)
        self.y_ = np.asarray(y, dtype=np.int64)[canon]
        return self

    def neighbors(self, X):
        k = min(int(self.params["k"]), self.X_.shape[0])
        dist = squared_distances(np.asarray(X, dtype=np.float64), self.X_)
        return np.argsort(dist, axis=1, kind="stable")[:, :k]

    def decision_function(self, X):
        nn = self.neighbors(X)
        votes = np.zeros((nn.shape[0], self.n_classes_))
        for col in range(nn.shape[1]):
            np.add.at(votes, (np.arange(nn.shape[0]), self.y_[nn[:, col]]), 1.0)
        return votes
