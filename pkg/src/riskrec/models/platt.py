"""Platt scaling: a two-parameter sigmoid mapping decision values to probabilities.

The map is ``p = sigmoid(A * decision + B)``, fitted by Newton iterations on
smoothed targets ``(N+ + 1)/(N+ + 2)`` and ``1/(N- + 2)``. A positive slope A
makes the probability strictly increasing in the decision value.
"""

from __future__ import annotations

import numpy as np

from riskrec.errors import ModelError


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def platt_probability(decision, a: float, b: float) -> np.ndarray:
    """Apply a fitted sigmoid to raw decision values."""
    z = a * np.asarray(decision, dtype=float) + b
    return _sigmoid(np.atleast_1d(z)) if np.ndim(z) else float(_sigmoid(np.array([z]))[0])


def fit_platt(decision, labels, max_iter: int = 100, tol: float = 1e-10) -> tuple[float, float]:
    """Fit (A, B) of the sigmoid by Newton's method on smoothed targets.

    `labels` are 0/1; `decision` are the raw classifier scores (ideally
    out-of-fold). Returns the slope/intercept pair.
    """
    d = np.asarray(decision, dtype=float)
    y = np.asarray(labels)
    if d.shape != y.shape or d.ndim != 1:
        raise ValueError("decision and labels must be 1-D and the same length")
    n_pos = int((y == 1).sum())
    n_neg = int(d.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ModelError("single-class labels: cannot fit a sigmoid")
    hi = (n_pos + 1.0) / (n_pos + 2.0)
    lo = 1.0 / (n_neg + 2.0)
    t = np.where(y == 1, hi, lo)

    a = 0.0
    b = float(np.log((n_pos + 1.0) / (n_neg + 1.0)))
    design = np.column_stack([d, np.ones_like(d)])
    ridge = 1e-12
    for _ in range(max_iter):
        p = _sigmoid(a * d + b)
        grad = design.T @ (p - t)
        if float(np.max(np.abs(grad))) < tol:
            break
        w = np.maximum(p * (1.0 - p), 1e-12)
        hess = (design * w[:, None]).T @ design
        hess[0, 0] += ridge
        hess[1, 1] += ridge
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        a -= float(step[0])
        b -= float(step[1])
    return a, b
