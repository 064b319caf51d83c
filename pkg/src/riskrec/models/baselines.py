"""Baseline classifiers and regressors for missing-feature estimation.

Each model standardizes continuous inputs internally and is deterministic
given its inputs, so serialized fits reproduce predictions exactly.
"""

from __future__ import annotations

import numpy as np

from riskrec.errors import ModelError
from riskrec.models.platt import _sigmoid
from riskrec.models.standardize import Standardizer


def _check_matrix(X: np.ndarray, y: np.ndarray) -> None:
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ModelError("X must be n x p with one target per row")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ModelError("non-finite training values")


def _is_binary(y: np.ndarray) -> bool:
    return bool(np.isin(y, (0, 1)).all())


class RidgeRegressor:
    """L2-regularized least squares on standardized features, intercept unpenalized."""

    kind = "ridge"

    def __init__(self, standardizer: Standardizer, weights: np.ndarray, intercept: float,
                 lam: float):
        self.standardizer = standardizer
        self.weights = np.asarray(weights, dtype=float)
        self.intercept = float(intercept)
        self.lam = float(lam)

    @classmethod
    def fit(cls, X, y, lam: float = 0.1, continuous_mask=None) -> "RidgeRegressor":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        _check_matrix(X, y)
        if lam <= 0:
            raise ModelError("ridge regularization strength must be positive")
        standardizer = Standardizer.fit(X, continuous_mask)
        Z = standardizer.transform(X)
        y_mean = float(y.mean())
        A = Z.T @ Z + lam * np.eye(Z.shape[1])
        w = np.linalg.solve(A, Z.T @ (y - y_mean))
        return cls(standardizer, w, y_mean, lam)

    @property
    def coefficients(self) -> np.ndarray:
        """Slopes in raw input units."""
        return self.weights / self.standardizer.std

    def predict(self, X) -> np.ndarray:
        Z = self.standardizer.transform(np.atleast_2d(np.asarray(X, dtype=float)))
        return Z @ self.weights + self.intercept

    def to_dict(self) -> dict:
        return {"kind": self.kind, "standardizer": self.standardizer.to_dict(),
                "weights": self.weights.tolist(), "intercept": self.intercept, "lam": self.lam}

    @classmethod
    def from_dict(cls, payload: dict) -> "RidgeRegressor":
        return cls(Standardizer.from_dict(payload["standardizer"]),
                   np.array(payload["weights"], dtype=float), payload["intercept"], payload["lam"])


class LogisticClassifier:
    """Newton-fitted logistic regression with a small L2 penalty."""

    kind = "logistic"

    def __init__(self, standardizer: Standardizer, weights: np.ndarray, intercept: float,
                 lam: float):
        self.standardizer = standardizer
        self.weights = np.asarray(weights, dtype=float)
        self.intercept = float(intercept)
        self.lam = float(lam)

    @classmethod
    def fit(cls, X, y, lam: float = 1e-4, max_iter: int = 100,
            continuous_mask=None) -> "LogisticClassifier":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        _check_matrix(X, np.asarray(y, dtype=float))
        if not _is_binary(y):
            raise ModelError("logistic regression requires 0/1 labels")
        if np.unique(y).size < 2:
            raise ModelError("single-class labels: cannot train a classifier")
        standardizer = Standardizer.fit(X, continuous_mask)
        Z = standardizer.transform(X)
        n, p = Z.shape
        design = np.column_stack([Z, np.ones(n)])
        beta = np.zeros(p + 1)
        yf = y.astype(float)
        for _ in range(max_iter):
            prob = _sigmoid(design @ beta)
            grad = design.T @ (prob - yf)
            grad[:p] += lam * beta[:p]
            if float(np.max(np.abs(grad))) < 1e-10:
                break
            w = np.maximum(prob * (1.0 - prob), 1e-12)
            hess = (design * w[:, None]).T @ design
            hess[np.arange(p), np.arange(p)] += lam
            beta -= np.linalg.solve(hess, grad)
        return cls(standardizer, beta[:p], float(beta[p]), lam)

    def decision(self, X) -> np.ndarray:
        Z = self.standardizer.transform(np.atleast_2d(np.asarray(X, dtype=float)))
        return Z @ self.weights + self.intercept

    def predict_proba(self, X) -> np.ndarray:
        return _sigmoid(self.decision(X))

    def predict_proba_one(self, x) -> float:
        return float(self.predict_proba(np.asarray(x, dtype=float)[None, :])[0])

    def grad_proba(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        p = self.predict_proba_one(x)
        return p * (1.0 - p) * self.weights / self.standardizer.std

    def to_dict(self) -> dict:
        return {"kind": self.kind, "standardizer": self.standardizer.to_dict(),
                "weights": self.weights.tolist(), "intercept": self.intercept, "lam": self.lam}

    @classmethod
    def from_dict(cls, payload: dict) -> "LogisticClassifier":
        return cls(Standardizer.from_dict(payload["standardizer"]),
                   np.array(payload["weights"], dtype=float), payload["intercept"], payload["lam"])


class KnnModel:
    """k-nearest neighbors on standardized Euclidean distance.

    Classifier output is the positive fraction among neighbors; regressor
    output is their target mean. Distance ties break by training row order.
    """

    kind = "knn"

    def __init__(self, standardizer: Standardizer, train_z: np.ndarray, targets: np.ndarray,
                 k: int, classify: bool):
        self.standardizer = standardizer
        self.train_z = np.asarray(train_z, dtype=float)
        self.targets = np.asarray(targets, dtype=float)
        self.k = int(k)
        self.classify = bool(classify)

    @classmethod
    def fit(cls, X, y, k: int = 5, continuous_mask=None, classify=None) -> "KnnModel":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        _check_matrix(X, y)
        if k < 1:
            raise ModelError("k must be >= 1")
        if k > X.shape[0]:
            raise ModelError("k exceeds the number of training rows")
        if classify is None:
            classify = _is_binary(y)
        standardizer = Standardizer.fit(X, continuous_mask)
        return cls(standardizer, standardizer.transform(X), y, k, classify)

    def _neighbor_mean(self, X) -> np.ndarray:
        Z = self.standardizer.transform(np.atleast_2d(np.asarray(X, dtype=float)))
        d = ((Z[:, None, :] - self.train_z[None, :, :]) ** 2).sum(axis=2)
        out = np.empty(Z.shape[0])
        order_index = np.arange(self.train_z.shape[0])
        for row in range(Z.shape[0]):
            nearest = np.lexsort((order_index, d[row]))[: self.k]
            out[row] = self.targets[nearest].mean()
        return out

    def predict(self, X) -> np.ndarray:
        return self._neighbor_mean(X)

    def predict_proba(self, X) -> np.ndarray:
        if not self.classify:
            raise ModelError("regressor kNN has no probability output")
        return self._neighbor_mean(X)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "standardizer": self.standardizer.to_dict(),
                "train_z": self.train_z.tolist(), "targets": self.targets.tolist(),
                "k": self.k, "classify": self.classify}

    @classmethod
    def from_dict(cls, payload: dict) -> "KnnModel":
        return cls(Standardizer.from_dict(payload["standardizer"]),
                   np.array(payload["train_z"], dtype=float),
                   np.array(payload["targets"], dtype=float), payload["k"], payload["classify"])


class CartModel:
    """Binary decision tree: Gini impurity for classification, variance for regression.

    Split gain ties break toward the lowest feature index, then the lowest
    threshold, which makes fits order-independent and reproducible.
    """

    kind = "cart"

    def __init__(self, standardizer: Standardizer, nodes: list[dict], classify: bool,
                 max_depth: int, min_leaf: int):
        self.standardizer = standardizer
        self.nodes = nodes
        self.classify = bool(classify)
        self.max_depth = int(max_depth)
        self.min_leaf = int(min_leaf)

    @classmethod
    def fit(cls, X, y, max_depth: int = 6, min_leaf: int = 5, continuous_mask=None,
            classify=None) -> "CartModel":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        _check_matrix(X, y)
        if max_depth < 1:
            raise ModelError("max_depth must be >= 1")
        if classify is None:
            classify = _is_binary(y)
        standardizer = Standardizer.fit(X, continuous_mask)
        Z = standardizer.transform(X)
        nodes: list[dict] = []

        def build(rows: np.ndarray, depth: int) -> int:
            node_id = len(nodes)
            value = float(y[rows].mean())
            nodes.append({"leaf": True, "value": value})
            if depth >= max_depth or rows.size < 2 * min_leaf or np.all(y[rows] == y[rows[0]]):
                return node_id
            split = _best_split(Z[rows], y[rows], min_leaf)
            if split is None:
                return node_id
            feat, thresh = split
            left_rows = rows[Z[rows, feat] <= thresh]
            right_rows = rows[Z[rows, feat] > thresh]
            nodes[node_id] = {"leaf": False, "feature": int(feat), "threshold": float(thresh),
                              "left": build(left_rows, depth + 1), "right": -1}
            nodes[node_id]["right"] = build(right_rows, depth + 1)
            return node_id

        build(np.arange(Z.shape[0]), 0)
        return cls(standardizer, nodes, classify, max_depth, min_leaf)

    def _predict_z(self, Z: np.ndarray) -> np.ndarray:
        out = np.empty(Z.shape[0])
        for i, z in enumerate(Z):
            node = self.nodes[0]
            while not node["leaf"]:
                node = self.nodes[node["left"] if z[node["feature"]] <= node["threshold"]
                                  else node["right"]]
            out[i] = node["value"]
        return out

    def predict(self, X) -> np.ndarray:
        Z = self.standardizer.transform(np.atleast_2d(np.asarray(X, dtype=float)))
        return self._predict_z(Z)

    def predict_proba(self, X) -> np.ndarray:
        if not self.classify:
            raise ModelError("regressor CART has no probability output")
        return self.predict(X)

    def split_thresholds_raw(self) -> list[tuple[int, float]]:
        """(feature, threshold) pairs of internal nodes, thresholds in raw units."""
        out = []
        for node in self.nodes:
            if not node["leaf"]:
                j = node["feature"]
                out.append((j, node["threshold"] * self.standardizer.std[j]
                            + self.standardizer.mean[j]))
        return out

    def to_dict(self) -> dict:
        return {"kind": self.kind, "standardizer": self.standardizer.to_dict(),
                "nodes": self.nodes, "classify": self.classify,
                "max_depth": self.max_depth, "min_leaf": self.min_leaf}

    @classmethod
    def from_dict(cls, payload: dict) -> "CartModel":
        return cls(Standardizer.from_dict(payload["standardizer"]), payload["nodes"],
                   payload["classify"], payload["max_depth"], payload["min_leaf"])


def _best_split(Z: np.ndarray, y: np.ndarray, min_leaf: int) -> tuple[int, float] | None:
    """Exhaustive split search; impurity is SSE, which is Gini-equivalent for 0/1 targets."""
    n = Z.shape[0]
    best = None
    best_score = np.inf
    for feat in range(Z.shape[1]):
        order = np.argsort(Z[:, feat], kind="stable")
        zs = Z[order, feat]
        ys = y[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        total_sum, total_sq = csum[-1], csq[-1]
        for i in range(min_leaf - 1, n - min_leaf):
            if zs[i] == zs[i + 1]:
                continue
            nl = i + 1
            nr = n - nl
            sse_l = csq[i] - csum[i] ** 2 / nl
            sse_r = (total_sq - csq[i]) - (total_sum - csum[i]) ** 2 / nr
            score = sse_l + sse_r
            if score < best_score - 1e-12:
                best_score = score
                best = (feat, 0.5 * (zs[i] + zs[i + 1]))
    return best


def fit_baseline(kind: str, X, y, **hyper):
    """Train one of the baseline estimators by kind tag.

    Classifier kinds require 0/1 targets; `knn` and `cart` pick the task from
    the target values unless `classify` is passed explicitly.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if kind == "ridge":
        return RidgeRegressor.fit(X, y, **hyper)
    if kind == "logistic":
        return LogisticClassifier.fit(X, y.astype(int), **hyper)
    if kind == "knn":
        return KnnModel.fit(X, y, **hyper)
    if kind == "cart":
        return CartModel.fit(X, y, **hyper)
    if kind in ("linear_svm", "rbf_svm"):
        from riskrec.models.svm import fit_svm

        if not _is_binary(y):
            raise ModelError(f"{kind} requires 0/1 labels")
        kernel = "linear" if kind == "linear_svm" else "rbf"
        return fit_svm(X, y.astype(int), kernel=kernel, **hyper)
    raise ModelError(f"unknown baseline kind {kind!r}")
