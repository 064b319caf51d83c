"""Historical-risk feature augmentation: temporal links between visit datasets.

Each instance at visit v gains one column per earlier visit holding the
predicted probability its own earlier row received from that visit's
classifier; the carry-forward alternative concatenates the full earlier
feature vectors instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from riskrec.errors import ContinuityError, DataError
from riskrec.missing_features import EnrichedInstance, EnrichedVisit, enrich, fit_plan

if TYPE_CHECKING:
    from riskrec.cohort import Cohort


@dataclass
class RiskAugmentedVisit:
    """An enriched visit plus its historical-risk columns.

    `provenance[k]` names the classifier that produced risk column k; rows of
    `risk` align with rows of `base`.
    """

    base: EnrichedVisit
    risk: np.ndarray
    provenance: tuple[str, ...]

    def __post_init__(self):
        n = len(self.base.ids)
        if self.risk.shape != (n, len(self.provenance)):
            raise DataError("risk column shape does not match provenance")
        if self.risk.size and (self.risk.min() < 0.0 or self.risk.max() > 1.0):
            raise DataError("risk values must lie in [0, 1]")

    @property
    def n_risk(self) -> int:
        return self.risk.shape[1]

    @property
    def matrix(self) -> np.ndarray:
        return np.hstack([self.base.X, self.risk]) if self.n_risk else self.base.X

    def instance(self, row: int) -> EnrichedInstance:
        return EnrichedInstance(values=self.matrix[row].copy(),
                                feature_cols=self.base.feature_cols, n_risk=self.n_risk)


def estimate_risk(clf, X: np.ndarray) -> np.ndarray:
    """Per-row predicted probability; length equals the row count."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.asarray(clf.predict_proba(X), dtype=float)


def augment_with_risk(cohort: "Cohort", classifiers: Sequence, v: int,
                      plans: Sequence | None = None,
                      reps: Sequence[RiskAugmentedVisit] | None = None) -> RiskAugmentedVisit:
    """Append risk columns from classifiers 1..v-1 to visit v's enriched rows.

    Each classifier k consumes the instance's visit-k representation (enriched
    and itself risk-augmented), so representations are built in visit order;
    `reps` short-circuits the recursion when earlier visits were already
    assembled. Instance continuity guarantees the earlier rows exist.
    """
    if v < 2:
        raise DataError("risk augmentation applies to visits >= 2")
    if len(classifiers) < v - 1:
        raise DataError(f"need classifiers for visits 1..{v - 1}")
    if reps is None:
        reps = build_representations(cohort, classifiers, v - 1, plans)
    if len(reps) < v - 1:
        raise DataError("representations for earlier visits are incomplete")

    base = _enriched_visit(cohort, v, plans)
    n = len(base.ids)
    risk = np.empty((n, v - 1))
    provenance = []
    for k in range(1, v):
        rep_k = reps[k - 1]
        row_of = {iid: r for r, iid in enumerate(rep_k.base.ids)}
        try:
            rows = [row_of[iid] for iid in base.ids]
        except KeyError as exc:
            raise ContinuityError(
                f"instance {exc.args[0]!r} missing from visit {k}: continuity violated")
        risk[:, k - 1] = estimate_risk(classifiers[k - 1], rep_k.matrix[rows])
        provenance.append(getattr(classifiers[k - 1], "model_id", f"f_v{k}"))
    return RiskAugmentedVisit(base=base, risk=risk, provenance=tuple(provenance))


def build_representations(cohort: "Cohort", classifiers: Sequence, up_to: int,
                          plans: Sequence | None = None) -> list[RiskAugmentedVisit]:
    """Enriched + risk-augmented matrices for visits 1..up_to, in visit order."""
    reps: list[RiskAugmentedVisit] = []
    for v in range(1, up_to + 1):
        base = _enriched_visit(cohort, v, plans)
        if v == 1:
            reps.append(RiskAugmentedVisit(base=base, risk=np.empty((len(base.ids), 0)),
                                           provenance=()))
        else:
            reps.append(augment_with_risk(cohort, classifiers, v, plans, reps))
    return reps


def _enriched_visit(cohort: "Cohort", v: int, plans: Sequence | None) -> EnrichedVisit:
    dataset = cohort.visit(v)
    present = tuple(sorted(dataset.present_features))
    if len(present) == len(cohort.schema.features):
        col_of = {j: c for c, j in enumerate(dataset.present_features)}
        X = dataset.X[:, [col_of[j] for j in present]]
        return EnrichedVisit(visit=v, ids=tuple(dataset.ids), X=X,
                             y_next=np.asarray(dataset.y_next).copy(), feature_cols=present)
    if plans is not None and len(plans) >= v - 1 and plans[v - 2] is not None:
        plan = plans[v - 2]
    else:
        plan = fit_plan(cohort, v)
    return enrich(plan, dataset)


def augment_with_carryforward(cohort: "Cohort", v: int):
    """Concatenate each instance's full earlier feature vectors before its visit-v row.

    Column count is the sum of the per-visit feature counts for visits 1..v;
    earlier visits come first, each in its own present-feature order.
    """
    if v < 2:
        raise DataError("carry-forward augmentation applies to visits >= 2")
    target = cohort.visit(v)
    blocks = []
    labels: list[str] = []
    masks = []
    for k in range(1, v + 1):
        src = cohort.visit(k)
        row_of = {iid: r for r, iid in enumerate(src.ids)}
        try:
            rows = [row_of[iid] for iid in target.ids]
        except KeyError as exc:
            raise ContinuityError(
                f"instance {exc.args[0]!r} missing from visit {k}: continuity violated")
        blocks.append(src.X[rows])
        for j in src.present_features:
            feat = cohort.schema.features[j]
            labels.append(f"v{k}:{feat.name}")
            masks.append(feat.kind == "continuous")
    return ConcatVisit(visit=v, ids=tuple(target.ids), X=np.hstack(blocks),
                       y_next=np.asarray(target.y_next).copy(), labels=tuple(labels),
                       continuous_mask=np.array(masks))


@dataclass
class ConcatVisit:
    """Carry-forward feature-vector dataset; columns span multiple visits so
    they carry labels rather than schema indices."""

    visit: int
    ids: tuple[str, ...]
    X: np.ndarray
    y_next: np.ndarray
    labels: tuple[str, ...]
    continuous_mask: np.ndarray


def write_augmented(rep: RiskAugmentedVisit, schema, path) -> None:
    """Export an augmented dataset in the visit-file format; risk columns are
    named ``risk_from_v{k}``."""
    from pathlib import Path

    names = [schema.features[j].name for j in rep.base.feature_cols]
    names += [f"risk_from_v{k + 1}" for k in range(rep.n_risk)]
    matrix = rep.matrix
    lines = [",".join(["id"] + names + ["y_next"])]
    for r, iid in enumerate(rep.base.ids):
        cells = [iid] + [repr(v) for v in matrix[r].tolist()] + [str(int(rep.base.y_next[r]))]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")
