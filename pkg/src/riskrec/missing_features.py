"""Estimation of features absent at later visits, plus the carry-forward
baseline and the estimator comparison harness.

Estimators for a missing feature are trained on visit-1 rows restricted to the
columns still measured at the target visit (the only visit where every feature
has ground truth) and then applied to the target visit's rows. Continuous
features default to ridge regression, binary ones to logistic regression.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from riskrec.errors import DataError, ModelError
from riskrec.models.baselines import fit_baseline
from riskrec.models.metrics import auc, mse

if TYPE_CHECKING:
    from riskrec.cohort import Cohort, VisitDataset

DEFAULT_CONTINUOUS_KIND = "ridge"
DEFAULT_BINARY_KIND = "logistic"

# kinds that can target each feature type
_REGRESSOR_KINDS = ("ridge", "knn", "cart")
_CLASSIFIER_KINDS = ("logistic", "knn", "cart", "linear_svm", "rbf_svm")


@dataclass(frozen=True)
class EnrichedInstance:
    """One instance's feature row after enrichment plus any risk columns.

    `values` holds the features in `feature_cols` (schema-index) order followed
    by `n_risk` historical-risk columns.
    """

    values: np.ndarray
    feature_cols: tuple[int, ...]
    n_risk: int


@dataclass
class EnrichedVisit:
    """A visit dataset with missing features filled in; `feature_cols` maps
    each column back to its visit-1 schema index."""

    visit: int
    ids: tuple[str, ...]
    X: np.ndarray
    y_next: np.ndarray
    feature_cols: tuple[int, ...]
    estimate_probs: dict[str, np.ndarray] = field(default_factory=dict)

    def instance(self, row: int, n_risk: int = 0) -> EnrichedInstance:
        return EnrichedInstance(values=self.X[row].copy(), feature_cols=self.feature_cols,
                                n_risk=n_risk)


@dataclass
class MissingFeaturePlan:
    """Per-feature trained estimators for everything absent at one visit."""

    visit: int
    consumed: tuple[int, ...]
    missing: tuple[int, ...]
    estimators: dict[int, object]
    kinds: dict[int, str]

    @property
    def empty(self) -> bool:
        return not self.missing


def _schema_sets(cohort: "Cohort", v: int):
    dataset = cohort.visit(v)
    all_idx = tuple(range(len(cohort.schema.features)))
    present = tuple(sorted(dataset.present_features))
    missing = tuple(sorted(set(all_idx) - set(present)))
    return dataset, present, missing


def fit_plan(cohort: "Cohort", v: int, kinds: dict | None = None, train_ids=None,
             hyper: dict | None = None) -> MissingFeaturePlan:
    """Train one estimator per feature missing at visit v.

    `kinds` overrides the estimator kind per feature name; `train_ids`
    restricts training to a subset of visit-1 instances (train/test hygiene).
    """
    if v < 2:
        raise DataError("missing-feature plans apply to visits >= 2")
    _, consumed, missing = _schema_sets(cohort, v)
    visit1 = cohort.visit(1)
    if set(consumed) - set(visit1.present_features):
        raise DataError("visit feature set is not a subset of visit 1's")
    plan = MissingFeaturePlan(visit=v, consumed=consumed, missing=missing, estimators={}, kinds={})
    if not missing:
        return plan

    rows = np.arange(len(visit1.ids))
    if train_ids is not None:
        keep = set(train_ids)
        rows = np.array([r for r, iid in enumerate(visit1.ids) if iid in keep], dtype=int)
    col_of = {j: c for c, j in enumerate(visit1.present_features)}
    X_train = visit1.X[np.ix_(rows, [col_of[j] for j in consumed])]
    mask = np.array([cohort.schema.features[j].kind == "continuous" for j in consumed])
    kinds = kinds or {}
    hyper = hyper or {}
    for m in missing:
        feat = cohort.schema.features[m]
        kind = kinds.get(feat.name) or (
            DEFAULT_CONTINUOUS_KIND if feat.kind == "continuous" else DEFAULT_BINARY_KIND)
        target = visit1.X[rows, col_of[m]]
        try:
            est = fit_baseline(kind, X_train, target, continuous_mask=mask,
                               **hyper.get(feat.name, {}))
        except ModelError as exc:
            raise ModelError(f"estimator for feature {feat.name!r} failed: {exc}") from exc
        plan.estimators[m] = est
        plan.kinds[m] = kind
    return plan


def enrich(plan: MissingFeaturePlan, dataset: "VisitDataset",
           schema=None) -> EnrichedVisit:
    """Extend each row with estimated values for the plan's missing features.

    Output columns are the visit's present features (schema order) followed by
    the estimated ones (schema order); binary estimates are thresholded at
    probability 0.5, with the raw probabilities kept as a diagnostic side
    channel.
    """
    present = tuple(sorted(dataset.present_features))
    if set(plan.consumed) - set(present):
        raise DataError("dataset lacks features the plan's estimators consume")
    col_of = {j: c for c, j in enumerate(dataset.present_features)}
    X_in = dataset.X[:, [col_of[j] for j in plan.consumed]] if plan.consumed else dataset.X
    blocks = [dataset.X[:, [col_of[j] for j in present]]]
    probs: dict[str, np.ndarray] = {}
    for m in plan.missing:
        est = plan.estimators[m]
        if hasattr(est, "predict_proba"):
            p = np.asarray(est.predict_proba(X_in), dtype=float)
            probs[str(m)] = p
            col = (p >= 0.5).astype(float)
        else:
            col = np.asarray(est.predict(X_in), dtype=float)
        blocks.append(col[:, None])
    X_out = np.hstack(blocks) if len(blocks) > 1 else blocks[0]
    if not np.isfinite(X_out).all():
        raise DataError("non-finite values in enriched matrix")
    return EnrichedVisit(visit=dataset.visit, ids=tuple(dataset.ids), X=X_out,
                         y_next=np.asarray(dataset.y_next).copy(),
                         feature_cols=present + plan.missing, estimate_probs=probs)


def carry_forward(cohort: "Cohort", v: int) -> np.ndarray:
    """Impute each instance's missing columns with its own visit-1 values.

    Returns an n_v x |M_v| matrix ordered like the visit's rows and the sorted
    missing-feature indices.
    """
    if v < 2:
        raise DataError("carry-forward applies to visits >= 2")
    dataset, _, missing = _schema_sets(cohort, v)
    visit1 = cohort.visit(1)
    row1 = {iid: r for r, iid in enumerate(visit1.ids)}
    col_of = {j: c for c, j in enumerate(visit1.present_features)}
    cols = [col_of[j] for j in missing]
    out = np.empty((len(dataset.ids), len(missing)))
    for r, iid in enumerate(dataset.ids):
        out[r] = visit1.X[row1[iid], cols]
    return out


def enrich_carry(cohort: "Cohort", v: int) -> EnrichedVisit:
    """Carry-forward counterpart of `enrich`: same layout, visit-1 values."""
    dataset, present, missing = _schema_sets(cohort, v)
    col_of = {j: c for c, j in enumerate(dataset.present_features)}
    blocks = [dataset.X[:, [col_of[j] for j in present]]]
    if missing:
        blocks.append(carry_forward(cohort, v))
    return EnrichedVisit(visit=dataset.visit, ids=tuple(dataset.ids),
                         X=np.hstack(blocks) if len(blocks) > 1 else blocks[0],
                         y_next=np.asarray(dataset.y_next).copy(),
                         feature_cols=present + missing)


def evaluate_estimators(cohort: "Cohort", v: int, holdout_features: list[str],
                        kinds: list | None = None) -> list[dict]:
    """Treat known visit-v features as missing and score every estimator on them.

    Estimators train on visit-1 rows restricted to the visit-v features minus
    the whole holdout set, then predict at visit v where ground truth exists.
    Binary features score by AUC, continuous ones by MSE; the carry-forward
    baseline is always included. `kinds` entries are kind tags or
    ``(tag, fit_fn)`` pairs for custom estimators.
    """
    dataset, present, _ = _schema_sets(cohort, v)
    visit1 = cohort.visit(1)
    name_to_idx = {f.name: j for j, f in enumerate(cohort.schema.features)}
    holdout_idx = []
    for name in holdout_features:
        j = name_to_idx.get(name)
        if j is None or j not in present:
            raise DataError(f"holdout feature {name!r} is not present at visit {v}")
        holdout_idx.append(j)
    input_idx = [j for j in present if j not in set(holdout_idx)]

    col1 = {j: c for c, j in enumerate(visit1.present_features)}
    colv = {j: c for c, j in enumerate(dataset.present_features)}
    X1 = visit1.X[:, [col1[j] for j in input_idx]]
    Xv = dataset.X[:, [colv[j] for j in input_idx]]
    mask = np.array([cohort.schema.features[j].kind == "continuous" for j in input_idx])
    row1 = {iid: r for r, iid in enumerate(visit1.ids)}

    if kinds is None:
        kinds = [DEFAULT_CONTINUOUS_KIND, DEFAULT_BINARY_KIND, "knn", "cart"]
    rows: list[dict] = []
    for j in holdout_idx:
        feat = cohort.schema.features[j]
        truth = dataset.X[:, colv[j]]
        binary = feat.kind == "binary"
        metric_name = "auc" if binary else "mse"

        carried = np.array(
            [visit1.X[row1[iid], col1[j]] for iid in dataset.ids], dtype=float)
        rows.append({"feature": feat.name, "kind": "carry", "metric": metric_name,
                     "value": auc(carried, truth.astype(int)) if binary else mse(carried, truth)})

        for entry in kinds:
            tag, fit_fn = entry if isinstance(entry, tuple) else (entry, None)
            allowed = _CLASSIFIER_KINDS if binary else _REGRESSOR_KINDS
            if fit_fn is None and tag not in allowed:
                continue
            target1 = visit1.X[:, col1[j]]
            if fit_fn is not None:
                est = fit_fn(X1, target1, mask, feat.name)
            else:
                est = fit_baseline(tag, X1, target1, continuous_mask=mask)
            if binary:
                score_fn = est.predict_proba if hasattr(est, "predict_proba") else est.predict
                value = auc(np.asarray(score_fn(Xv), dtype=float), truth.astype(int))
            else:
                value = mse(np.asarray(est.predict(Xv), dtype=float), truth)
            rows.append({"feature": feat.name, "kind": tag, "metric": metric_name,
                         "value": value})
    return rows


def write_score_table(rows: list[dict], path) -> None:
    """Export estimator scores as delimited text: feature, kind, metric_name, value."""
    from pathlib import Path

    lines = ["feature,kind,metric_name,value"]
    for row in rows:
        lines.append(f"{row['feature']},{row['kind']},{row['metric']},{row['value']!r}")
    Path(path).write_text("\n".join(lines) + "\n")
