"""Soft-margin SVM trained by sequential minimal optimization (SMO).

The dual is solved pairwise with an error cache; probabilities come from a
sigmoid fitted on 3-fold cross-validated decision values; the RBF decision
function is smooth, so the probability has an analytic input gradient.
"""

from __future__ import annotations

import numpy as np

from riskrec.errors import ConvergenceError, ModelError
from riskrec.models.platt import fit_platt, platt_probability
from riskrec.models.standardize import Standardizer

KKT_TOL = 1e-3
MAX_SMO_STEPS = 100_000


def rbf_gamma_heuristic(Z: np.ndarray, subsample: int = 256, seed: int = 0) -> float:
    """1 / median pairwise squared distance of a seeded training subsample."""
    n = Z.shape[0]
    if n > subsample:
        idx = np.random.default_rng(seed).choice(n, size=subsample, replace=False)
        Z = Z[np.sort(idx)]
    sq = _sq_dists(Z, Z)
    iu = np.triu_indices(Z.shape[0], k=1)
    med = float(np.median(sq[iu])) if iu[0].size else 0.0
    return 1.0 / med if med > 0 else 1.0


def _sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * (A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return sq


def _kernel_matrix(A: np.ndarray, B: np.ndarray, kernel: str, gamma: float) -> np.ndarray:
    if kernel == "linear":
        return A @ B.T
    if kernel == "rbf":
        return np.exp(-gamma * _sq_dists(A, B))
    raise ModelError(f"unknown kernel {kernel!r}")


def _smo(K: np.ndarray, y: np.ndarray, c_cap: np.ndarray, tol: float = KKT_TOL,
         max_steps: int = MAX_SMO_STEPS) -> tuple[np.ndarray, float]:
    """Solve the SVM dual for signed labels y; returns (alphas, bias).

    Pairwise updates on the maximally KKT-violating pair (first-order working
    set selection); the violation gap m - M falls below `tol` at convergence.
    `c_cap` is the per-sample box cap. `max_steps` caps the number of pairwise
    updates; hitting it is an error.
    """
    n = y.size
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of the dual objective at alpha = 0
    bias = 0.0
    eps = 1e-12
    for _ in range(max_steps):
        neg_yg = -y * grad
        up = ((y > 0) & (alpha < c_cap - eps)) | ((y < 0) & (alpha > eps))
        dn = ((y < 0) & (alpha < c_cap - eps)) | ((y > 0) & (alpha > eps))
        if not up.any() or not dn.any():
            break
        up_vals = np.where(up, neg_yg, -np.inf)
        dn_vals = np.where(dn, neg_yg, np.inf)
        i = int(np.argmax(up_vals))
        j = int(np.argmin(dn_vals))
        m, mm = up_vals[i], dn_vals[j]
        bias = 0.5 * (m + mm)
        if m - mm <= tol:
            return alpha, bias
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        t = (m - mm) / max(quad, eps)
        # keep both alphas inside their boxes while preserving sum(alpha * y)
        cap_i = (c_cap[i] - alpha[i]) if y[i] > 0 else alpha[i]
        cap_j = alpha[j] if y[j] > 0 else (c_cap[j] - alpha[j])
        t = min(t, cap_i, cap_j)
        alpha[i] = min(max(alpha[i] + y[i] * t, 0.0), c_cap[i])
        alpha[j] = min(max(alpha[j] - y[j] * t, 0.0), c_cap[j])
        grad += t * y * (K[:, i] - K[:, j])
    else:
        raise ConvergenceError(f"SMO exceeded {max_steps} pairwise updates")
    return alpha, bias


def _class_caps(y: np.ndarray, c_reg: float, class_weight) -> np.ndarray:
    """Per-sample dual caps, never above c_reg.

    "balanced" shrinks the majority class's cap by the class ratio so rare
    positives are not drowned out; the minority cap stays at c_reg, keeping
    every alpha within [0, c_reg].
    """
    caps = np.full(y.size, c_reg)
    if class_weight == "balanced":
        n_pos = int((y > 0).sum())
        n_neg = y.size - n_pos
        if n_pos == 0 or n_neg == 0:
            return caps
        if n_neg > n_pos:
            caps[y < 0] = c_reg * n_pos / n_neg
        else:
            caps[y > 0] = c_reg * n_neg / n_pos
    elif class_weight is not None:
        raise ModelError(f"unknown class_weight {class_weight!r}")
    return caps


class SvmClassifier:
    """Trained SVM with Platt-scaled probability outputs.

    Holds the standardized support vectors, their signed dual coefficients,
    the bias, and the sigmoid (A, B). `alphas_` and `labels_signed_` keep the
    full dual solution for feasibility diagnostics; only support vectors are
    serialized.
    """

    def __init__(self, kernel: str, gamma: float, c_reg: float, standardizer: Standardizer,
                 support_z: np.ndarray, coef: np.ndarray, bias: float,
                 platt_a: float, platt_b: float):
        self.kind = "rbf_svm" if kernel == "rbf" else "linear_svm"
        self.kernel = kernel
        self.gamma = float(gamma)
        self.c_reg = float(c_reg)
        self.standardizer = standardizer
        self.support_z = np.asarray(support_z, dtype=float)
        self.coef = np.asarray(coef, dtype=float)
        self.bias = float(bias)
        self.platt_a = float(platt_a)
        self.platt_b = float(platt_b)
        self.alphas_: np.ndarray | None = None
        self.labels_signed_: np.ndarray | None = None
        # linear decision collapses to a single weight vector
        self._w = self.support_z.T @ self.coef if kernel == "linear" else None

    @property
    def n_features(self) -> int:
        return self.standardizer.n_features

    def decision(self, X) -> np.ndarray:
        """Raw margin values for raw-unit inputs (vector or matrix)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Z = self.standardizer.transform(X)
        if self.kernel == "linear":
            return Z @ self._w + self.bias
        return _kernel_matrix(Z, self.support_z, "rbf", self.gamma) @ self.coef + self.bias

    def predict_proba(self, X) -> np.ndarray:
        return platt_probability(self.decision(X), self.platt_a, self.platt_b)

    def predict_proba_one(self, x) -> float:
        return float(self.predict_proba(np.asarray(x, dtype=float)[None, :])[0])

    def grad_proba(self, x) -> np.ndarray:
        """d predict_proba / d x (raw units) at a single point, by chain rule."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.size != self.n_features:
            raise ModelError(f"expected a vector of {self.n_features} features")
        z = self.standardizer.transform(x[None, :])[0]
        if self.kernel == "linear":
            d = float(z @ self._w + self.bias)
            ddec_dz = self._w
        else:
            k = np.exp(-self.gamma * ((self.support_z - z) ** 2).sum(axis=1))
            d = float(self.coef @ k + self.bias)
            ddec_dz = (-2.0 * self.gamma) * ((z - self.support_z) * (self.coef * k)[:, None]).sum(axis=0)
        p = float(platt_probability(d, self.platt_a, self.platt_b))
        return (p * (1.0 - p) * self.platt_a) * ddec_dz / self.standardizer.std

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "kernel": self.kernel,
            "gamma": self.gamma,
            "c_reg": self.c_reg,
            "standardizer": self.standardizer.to_dict(),
            "support_z": self.support_z.tolist(),
            "coef": self.coef.tolist(),
            "bias": self.bias,
            "platt_a": self.platt_a,
            "platt_b": self.platt_b,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SvmClassifier":
        return cls(
            kernel=payload["kernel"],
            gamma=payload["gamma"],
            c_reg=payload["c_reg"],
            standardizer=Standardizer.from_dict(payload["standardizer"]),
            support_z=np.array(payload["support_z"], dtype=float),
            coef=np.array(payload["coef"], dtype=float),
            bias=payload["bias"],
            platt_a=payload["platt_a"],
            platt_b=payload["platt_b"],
        )


def _validate_training_input(X: np.ndarray, y: np.ndarray) -> None:
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ModelError("X must be n x p with one label per row")
    if X.shape[0] < 2:
        raise ModelError("need at least 2 training rows")
    if not np.isfinite(X).all():
        raise ModelError("non-finite values in X")
    if not np.isin(y, (0, 1)).all():
        raise ModelError("labels must be 0/1")
    if np.unique(y).size < 2:
        raise ModelError("single-class labels: cannot train a classifier")


def _stratified_folds(y: np.ndarray, n_folds: int) -> np.ndarray:
    """Deterministic round-robin fold ids, assigned per class in index order."""
    folds = np.empty(y.size, dtype=int)
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        folds[idx] = np.arange(idx.size) % n_folds
    return folds


def fit_svm(X, y, kernel: str = "rbf", c_reg: float = 1.0, gamma="auto",
            continuous_mask=None, platt_folds: int = 3,
            class_weight="balanced") -> SvmClassifier:
    """Train an SVM and calibrate its probabilities.

    The sigmoid is fitted on decision values of held-out folds so calibration
    does not see its own training scores; the final dual is solved on all rows.
    `class_weight="balanced"` shrinks the majority class's dual cap, which
    stabilizes the decision function when events are rare.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    _validate_training_input(X, y)
    if c_reg <= 0:
        raise ModelError("c_reg must be positive")
    if kernel not in ("rbf", "linear"):
        raise ModelError(f"unknown kernel {kernel!r}")

    standardizer = Standardizer.fit(X, continuous_mask)
    Z = standardizer.transform(X)
    y_signed = np.where(y == 1, 1.0, -1.0)
    g = rbf_gamma_heuristic(Z) if gamma == "auto" else float(gamma)
    if kernel == "rbf" and g <= 0:
        raise ModelError("gamma must be positive")

    K = _kernel_matrix(Z, Z, kernel, g)

    cv_decisions, cv_labels = [], []
    oof_decision = np.full(y.size, np.nan)
    folds = _stratified_folds(y, platt_folds)
    for f in range(platt_folds):
        tr = np.flatnonzero(folds != f)
        held = np.flatnonzero(folds == f)
        if held.size == 0 or np.unique(y[tr]).size < 2:
            continue
        caps_f = _class_caps(y_signed[tr], c_reg, class_weight)
        a_f, b_f = _smo(K[np.ix_(tr, tr)].copy(), y_signed[tr], caps_f)
        d_held = _kernel_matrix(Z[held], Z[tr], kernel, g) @ (a_f * y_signed[tr]) + b_f
        oof_decision[held] = d_held
        cv_decisions.append(d_held)
        cv_labels.append(y[held])

    alpha, bias = _smo(K, y_signed, _class_caps(y_signed, c_reg, class_weight))
    full_decision = K @ (alpha * y_signed) + bias

    if cv_decisions:
        platt_a, platt_b = fit_platt(np.concatenate(cv_decisions), np.concatenate(cv_labels))
    else:
        platt_a, platt_b = fit_platt(full_decision, y)

    sv = np.flatnonzero(alpha > 1e-12)
    clf = SvmClassifier(kernel, g, c_reg, standardizer,
                        support_z=Z[sv], coef=alpha[sv] * y_signed[sv], bias=bias,
                        platt_a=platt_a, platt_b=platt_b)
    clf.alphas_ = alpha
    clf.labels_signed_ = y_signed
    # out-of-fold probabilities per training row: honest scores for stacking
    # the model's outputs as features of a downstream model
    oof = np.where(np.isnan(oof_decision), full_decision, oof_decision)
    clf.oof_proba_ = platt_probability(oof, platt_a, platt_b)
    return clf
