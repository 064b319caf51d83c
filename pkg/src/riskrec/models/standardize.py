"""Per-feature z-score standardization shared by every model.

Continuous columns are centered and scaled with statistics from the training
split only; binary columns pass through untouched (mean 0, std 1). Keeping the
transform inside the model lets the optimizer reason in standardized space
consistently.
"""

from __future__ import annotations

import numpy as np


class Standardizer:
    """Train-split z-scores for continuous columns, identity for binary ones."""

    def __init__(self, mean: np.ndarray, std: np.ndarray):
        self.mean = np.asarray(mean, dtype=float)
        self.std = np.asarray(std, dtype=float)
        if self.mean.shape != self.std.shape:
            raise ValueError("mean/std shape mismatch")
        if np.any(self.std <= 0):
            raise ValueError("standard deviations must be positive")

    @classmethod
    def fit(cls, X: np.ndarray, continuous_mask: np.ndarray | None = None) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise ValueError("expected a 2-D matrix")
        if continuous_mask is None:
            continuous_mask = np.ones(X.shape[1], dtype=bool)
        continuous_mask = np.asarray(continuous_mask, dtype=bool)
        mean = np.zeros(X.shape[1])
        std = np.ones(X.shape[1])
        cols = np.flatnonzero(continuous_mask)
        if cols.size:
            mean[cols] = X[:, cols].mean(axis=0)
            col_std = X[:, cols].std(axis=0)
            # constant columns carry no scale information; leave them unscaled
            col_std[col_std < 1e-12] = 1.0
            std[cols] = col_std
        return cls(mean, std)

    @classmethod
    def identity(cls, n_features: int) -> "Standardizer":
        return cls(np.zeros(n_features), np.ones(n_features))

    @property
    def n_features(self) -> int:
        return self.mean.shape[0]

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[-1]}")
        return (X - self.mean) / self.std

    def inverse(self, Z: np.ndarray) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        if Z.shape[-1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {Z.shape[-1]}")
        return Z * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, payload: dict) -> "Standardizer":
        return cls(np.array(payload["mean"], dtype=float), np.array(payload["std"], dtype=float))
