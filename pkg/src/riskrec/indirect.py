"""Indirectly-changeable feature estimator: Nadaraya-Watson kernel regression.

Maps a fixed context block plus the directly changeable features to the
indirectly changeable ones, smoothly, with an analytic Jacobian in the direct
block. Inputs are standardized internally; targets stay in raw units, so every
prediction is a convex combination of training targets.
"""

from __future__ import annotations

import numpy as np

from riskrec.errors import ModelError
from riskrec.models.standardize import Standardizer
from riskrec.models.svm import rbf_gamma_heuristic

# below this total kernel mass the query counts as out-of-range: fall back to
# the unweighted target mean with zero gradient instead of dividing by ~0
KERNEL_MASS_FLOOR = 1e-12


class KernelRegressor:
    """Gaussian-kernel weighted average of training targets."""

    kind = "nw_kernel"

    def __init__(self, standardizer: Standardizer, train_z: np.ndarray, targets: np.ndarray,
                 gamma: float):
        self.standardizer = standardizer
        self.train_z = np.asarray(train_z, dtype=float)
        self.targets = np.asarray(targets, dtype=float)
        self.gamma = float(gamma)
        if self.targets.ndim != 2 or self.targets.shape[0] != self.train_z.shape[0]:
            raise ModelError("targets must be n x |I| aligned with the inputs")
        self._target_mean = self.targets.mean(axis=0)

    @property
    def n_inputs(self) -> int:
        return self.train_z.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.targets.shape[1]

    def _query_z(self, x_u, x_d) -> np.ndarray:
        q = np.concatenate([np.asarray(x_u, dtype=float), np.asarray(x_d, dtype=float)])
        if q.size != self.n_inputs:
            raise ModelError(f"expected {self.n_inputs} inputs, got {q.size}")
        return self.standardizer.transform(q[None, :])[0]

    def _kernels(self, z: np.ndarray) -> np.ndarray:
        return np.exp(-self.gamma * ((self.train_z - z) ** 2).sum(axis=1))

    def predict(self, x_u, x_d) -> np.ndarray:
        z = self._query_z(x_u, x_d)
        k = self._kernels(z)
        mass = k.sum()
        if mass < KERNEL_MASS_FLOOR:
            return self._target_mean.copy()
        return (k @ self.targets) / mass

    def jacobian(self, x_u, x_d) -> np.ndarray:
        """d prediction / d x_d (raw units), shape |I| x |D|."""
        x_d = np.asarray(x_d, dtype=float)
        z = self._query_z(x_u, x_d)
        n_d = x_d.size
        k = self._kernels(z)
        mass = k.sum()
        if mass < KERNEL_MASS_FLOOR:
            return np.zeros((self.n_outputs, n_d))
        h = (k @ self.targets) / mass
        # dk_i/dz = -2 gamma (z - z_i) k_i, restricted to the trailing direct block
        dz = z[-n_d:] - self.train_z[:, -n_d:]
        dk = (-2.0 * self.gamma) * dz * k[:, None]
        num = self.targets.T @ dk
        jac_z = (num - np.outer(h, dk.sum(axis=0))) / mass
        return jac_z / self.standardizer.std[-n_d:]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "standardizer": self.standardizer.to_dict(),
                "train_z": self.train_z.tolist(), "targets": self.targets.tolist(),
                "gamma": self.gamma}

    @classmethod
    def from_dict(cls, payload: dict) -> "KernelRegressor":
        return cls(Standardizer.from_dict(payload["standardizer"]),
                   np.array(payload["train_z"], dtype=float),
                   np.array(payload["targets"], dtype=float), payload["gamma"])


def fit_indirect(X_ud, X_i, bandwidth="auto", continuous_mask=None) -> KernelRegressor:
    """Fit the estimator on context+direct inputs and indirect targets.

    `bandwidth` is the kernel length scale in standardized units; "auto" uses
    the median pairwise-distance heuristic shrunk at the usual n^(-1/(d+4))
    nonparametric rate so dense samples resolve curvature.
    """
    X_ud = np.asarray(X_ud, dtype=float)
    X_i = np.asarray(X_i, dtype=float)
    if X_i.ndim == 1:
        X_i = X_i[:, None]
    if X_ud.ndim != 2 or X_ud.shape[0] != X_i.shape[0]:
        raise ModelError("inputs and targets must have matching row counts")
    if X_ud.shape[0] < 2:
        raise ModelError("need at least 2 training rows")
    standardizer = Standardizer.fit(X_ud, continuous_mask)
    Z = standardizer.transform(X_ud)
    if bandwidth == "auto":
        n, d = Z.shape
        # the median heuristic alone oversmooths dense low-dimensional samples
        gamma = 2.0 * rbf_gamma_heuristic(Z) * float(n) ** (2.0 / (d + 4.0))
    else:
        bandwidth = float(bandwidth)
        if bandwidth <= 0:
            raise ModelError("bandwidth must be positive")
        gamma = 1.0 / (2.0 * bandwidth * bandwidth)
    return KernelRegressor(standardizer, Z, X_i, gamma)


def predict_indirect(estimator: KernelRegressor, x_u, x_d) -> np.ndarray:
    return estimator.predict(x_u, x_d)


def grad_indirect(estimator: KernelRegressor, x_u, x_d) -> np.ndarray:
    return estimator.jacobian(x_u, x_d)
