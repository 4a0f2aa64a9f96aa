"""CART trees: Gini classification trees and squared-error regression trees."""

from __future__ import annotations

import numpy as np

from .base import Estimator

LEAF = -1


class Tree:
    """Flat array representation; node 0 is the root, ``x <= threshold`` goes left."""

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.nonzero(self.feature[node] != LEAF)[0]
        while active.size:
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def to_state(self) -> dict:
        return {k: getattr(self, k) for k in ("feature", "threshold", "left", "right", "value")}

    @classmethod
    def from_state(cls, state: dict) -> "Tree":
        return cls(**state)


class _Builder:
    def __init__(self):
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []

    def add(self, value) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(value)
        return len(self.feature) - 1

    def split(self, node, feature, threshold, left, right):
        self.feature[node] = feature
        self.threshold[node] = threshold
        self.left[node] = left
        self.right[node] = right

    def tree(self) -> Tree:
        return Tree(self.feature, self.threshold, self.left, self.right, np.array(self.value))


def _midpoint(lo: float, hi: float) -> float:
    mid = lo + (hi - lo) / 2.0
    # adjacent floats: the midpoint can round up to hi, which would send hi left
    return lo if mid >= hi else mid


def _best_gini_split(X, Y, idx, feats):
    """Best (feature, threshold, score) over ``feats`` for the samples ``idx``.

    ``Y`` holds per-sample weighted one-hot class rows. The score is
    ``sum(left^2)/w_left + sum(right^2)/w_right`` (larger is purer); ties
    resolve to the lowest feature, then the lowest threshold.
    """
    Xs = X[np.ix_(idx, feats)]
    order = np.argsort(Xs, axis=0, kind="stable")
    vals = np.take_along_axis(Xs, order, axis=0)
    cum = np.cumsum(Y[idx][order], axis=0)  # (n, m, K)
    total = cum[-1]
    left = cum[:-1]
    right = total[None] - left
    wl = left.sum(axis=2)
    wr = right.sum(axis=2)
    valid = (vals[:-1] < vals[1:]) & (wl > 0) & (wr > 0)
    if not valid.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        score = (left**2).sum(axis=2) / wl + (right**2).sum(axis=2) / wr
    score = np.where(valid, score, -np.inf)
    flat = score.T.ravel()  # feature-major so argmax favors the lowest feature, then threshold
    best = int(np.argmax(flat))
    f_pos, pos = divmod(best, score.shape[0])
    return feats[f_pos], _midpoint(vals[pos, f_pos], vals[pos + 1, f_pos]), flat[best]


def build_classification_tree(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    sample_weight: np.ndarray | None = None,
    max_depth: int | None = None,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
    min_samples_split: int = 2,
) -> Tree:
    """Grow a Gini CART tree; leaves store weighted class distributions.

    With ``max_features`` set, each split draws that many candidate features
    from ``rng`` and widens to all remaining features only when none of the
    drawn ones can separate the node.
    """
    n, d = X.shape
    w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    Y = np.zeros((n, n_classes))
    Y[np.arange(n), y] = w
    all_feats = np.arange(d)

    b = _Builder()
    root_counts = Y.sum(axis=0)
    stack = [(b.add(root_counts / root_counts.sum()), np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        counts = Y[idx].sum(axis=0)
        if idx.size < min_samples_split or np.count_nonzero(counts) <= 1:
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        if max_features is not None and max_features < d:
            feats = np.sort(rng.choice(d, size=max_features, replace=False))
            found = _best_gini_split(X, Y, idx, feats)
            if found is None:
                rest = np.setdiff1d(all_feats, feats)
                found = _best_gini_split(X, Y, idx, rest) if rest.size else None
        else:
            found = _best_gini_split(X, Y, idx, all_feats)
        if found is None:
            continue
        feat, thr, _ = found
        go_left = X[idx, feat] <= thr
        li, ri = idx[go_left], idx[~go_left]
        lc, rc = Y[li].sum(axis=0), Y[ri].sum(axis=0)
        left = b.add(lc / lc.sum())
        right = b.add(rc / rc.sum())
        b.split(node, feat, thr, left, right)
        # right pushed first so the left subtree is numbered first
        stack.append((right, ri, depth + 1))
        stack.append((left, li, depth + 1))
    return b.tree()


def build_regression_tree(
    X: np.ndarray,
    r: np.ndarray,
    max_depth: int,
    order: np.ndarray | None = None,
) -> tuple[Tree, np.ndarray]:
    """Squared-error CART regression tree of bounded depth.

    ``order`` is the column-wise argsort of ``X`` (reused across boosting
    stages). Returns the tree (leaf values = means) and the leaf index of
    every training row.
    """
    n, d = X.shape
    if order is None:
        order = np.argsort(X, axis=0, kind="stable")
    order_t = order.T
    cols = np.arange(d)
    assign = np.zeros(n, dtype=np.int64)
    b = _Builder()
    frontier = [b.add(float(r.mean()))]
    for _depth in range(max_depth):
        nxt = []
        for node in frontier:
            member = assign == node
            cnt = int(member.sum())
            if cnt < 2:
                continue
            sel = member[order_t]
            srt = order_t[sel].reshape(d, cnt).T  # (cnt, d) sample ids sorted per feature
            vals = X[srt, cols]
            rs = r[srt]
            total = rs[:, 0].sum()
            s_left = np.cumsum(rs, axis=0)[:-1]
            n_left = np.arange(1, cnt)[:, None]
            score = s_left**2 / n_left + (total - s_left) ** 2 / (cnt - n_left)
            valid = vals[:-1] < vals[1:]
            if not valid.any():
                continue
            score = np.where(valid, score, -np.inf)
            flat = score.T.ravel()
            best = int(np.argmax(flat))
            if not flat[best] > total**2 / cnt + 1e-12 * max(1.0, abs(total**2 / cnt)):
                continue
            f, pos = divmod(best, cnt - 1)
            thr = _midpoint(vals[pos, f], vals[pos + 1, f])
            rows = np.nonzero(member)[0]
            go_left = X[rows, f] <= thr
            left = b.add(float(r[rows[go_left]].mean()))
            right = b.add(float(r[rows[~go_left]].mean()))
            b.split(node, f, thr, left, right)
            assign[rows[go_left]] = left
            assign[rows[~go_left]] = right
            nxt += [left, right]
        frontier = nxt
    return b.tree(), assign


class DecisionTree(Estimator):
    name = "decision_tree"
    defaults = {"max_depth": None, "min_samples_split": 2}
    learned = ("tree_",)

    def fit(self, X, y, n_classes):
        self.n_classes_ = n_classes
        self.tree_ = build_classification_tree(
            X, y, n_classes, max_depth=self.params["max_depth"], min_samples_split=self.params["min_samples_split"]
        )
        return self

    def decision_function(self, X):
        return self.tree_.predict_value(X)

    def _encode(self, name, value):
        return value.to_state()

    def _decode(self, name, value):
        return Tree.from_state(value)
