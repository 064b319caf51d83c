"""Ranking and regression metrics used by the estimator comparisons."""

from __future__ import annotations

import numpy as np

from riskrec.errors import ModelError


def auc(scores, labels) -> float:
    """Area under the ROC curve via the normalized Mann-Whitney U statistic.

    Ties between a positive and a negative score count 0.5. Both classes must
    be present.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-D and the same length")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ModelError("single-class labels: AUC undefined")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.size, dtype=float)
    sorted_scores = scores[order]
    # midranks: tied scores share the average of their 1-based rank range
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def mse(pred, truth) -> float:
    """Mean squared error between two equal-length vectors."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ValueError("pred and truth must be 1-D and the same length")
    if pred.size == 0:
        raise ValueError("empty input")
    return float(np.mean((pred - truth) ** 2))
