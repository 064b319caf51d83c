"""Longitudinal cohort data model: loading, validation, and the
continuity/event-exclusion discipline.

A cohort is one delimited file per visit (`id` column, feature columns,
`y_next` outcome column) plus a JSON config declaring the visit-1 schema,
the U/I/D partition, per-feature change costs, and raw-unit bounds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from riskrec.errors import ConfigError, ContinuityError, DataError, ExclusionError
from riskrec.inverse_opt import CostModel

FEATURE_KINDS = ("continuous", "binary")


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str
    unit: str = ""


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered visit-1 feature set; kinds are fixed across visits."""

    features: tuple[Feature, ...]
    version: str = "1"

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ConfigError("feature names must be unique")
        for f in self.features:
            if f.kind not in FEATURE_KINDS:
                raise ConfigError(f"feature {f.name!r} has unknown kind {f.kind!r}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ConfigError(f"unknown feature {name!r}")

    def continuous_mask(self, indices) -> np.ndarray:
        return np.array([self.features[j].kind == "continuous" for j in indices])


@dataclass(frozen=True)
class FeaturePartition:
    """Disjoint cover of the visit-1 features into unchangeable, indirectly
    changeable, and directly changeable index sets."""

    unchangeable: tuple[int, ...]
    indirect: tuple[int, ...]
    direct: tuple[int, ...]

    def __post_init__(self):
        u, i, d = set(self.unchangeable), set(self.indirect), set(self.direct)
        if (u & i) or (u & d) or (i & d):
            raise ConfigError("partition sets must be pairwise disjoint")
        if not d:
            raise ConfigError("direct feature set must be nonempty")

    def validate_cover(self, n_features: int) -> None:
        union = set(self.unchangeable) | set(self.indirect) | set(self.direct)
        if union != set(range(n_features)):
            raise ConfigError("partition must cover every visit-1 feature exactly once")

    @classmethod
    def from_names(cls, schema: FeatureSchema, unchangeable, indirect, direct) -> "FeaturePartition":
        return cls(
            unchangeable=tuple(sorted(schema.index_of(n) for n in unchangeable)),
            indirect=tuple(sorted(schema.index_of(n) for n in indirect)),
            direct=tuple(sorted(schema.index_of(n) for n in direct)),
        )


@dataclass
class VisitDataset:
    """One visit's instances; `y_next` is the outcome observed at visit v+1."""

    visit: int
    ids: tuple[str, ...]
    X: np.ndarray
    y_next: np.ndarray
    present_features: tuple[int, ...]

    def __post_init__(self):
        if len(set(self.ids)) != len(self.ids):
            raise DataError(f"duplicate ids at visit {self.visit}")
        n = len(self.ids)
        if self.X.shape != (n, len(self.present_features)) or self.y_next.shape != (n,):
            raise DataError(f"inconsistent row counts at visit {self.visit}")
        if not np.isin(self.y_next, (0, 1)).all():
            raise DataError(f"non-binary outcome values at visit {self.visit}")

    @property
    def n(self) -> int:
        return len(self.ids)


@dataclass
class Bounds:
    """Raw-unit box bounds per direct feature, aligned with sorted D indices."""

    d_indices: tuple[int, ...]
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        if np.any(self.lower > self.upper):
            raise ConfigError("bounds must satisfy lower <= upper")


@dataclass
class Cohort:
    schema: FeatureSchema
    partition: FeaturePartition
    visits: tuple[VisitDataset, ...]
    cost_model: CostModel
    bounds: Bounds

    @property
    def n_visits(self) -> int:
        return len(self.visits)

    def visit(self, v: int) -> VisitDataset:
        if not 1 <= v <= self.n_visits:
            raise DataError(f"visit {v} out of range 1..{self.n_visits}")
        return self.visits[v - 1]


def validate_cohort(cohort: Cohort) -> None:
    """Check instance continuity, event exclusion, and feature-set containment."""
    cohort.partition.validate_cover(len(cohort.schema.features))
    all_idx = set(range(len(cohort.schema.features)))
    first = cohort.visits[0]
    if set(first.present_features) != all_idx:
        raise DataError("visit 1 must measure every schema feature")
    for pos, ds in enumerate(cohort.visits):
        if ds.visit != pos + 1:
            raise DataError("visits must be ordered 1..V")
        if not set(ds.present_features) <= all_idx:
            raise DataError(f"visit {ds.visit} has features outside the visit-1 schema")
    for prev, nxt in zip(cohort.visits, cohort.visits[1:]):
        prev_ids = set(prev.ids)
        missing = [i for i in nxt.ids if i not in prev_ids]
        if missing:
            raise ContinuityError(
                f"continuity violated: id {missing[0]!r} at visit {nxt.visit} "
                f"is absent from visit {prev.visit}")
    for ds in cohort.visits:
        events = {iid for iid, y in zip(ds.ids, ds.y_next) if y == 1}
        for later in cohort.visits[ds.visit:]:
            reappeared = events & set(later.ids)
            if reappeared:
                raise ExclusionError(
                    f"event exclusion violated: id {sorted(reappeared)[0]!r} has the outcome "
                    f"at visit {ds.visit} but reappears at visit {later.visit}")


def enforce_exclusion(visits: list[VisitDataset]) -> list[VisitDataset]:
    """Drop every instance from all visits after the one where its outcome is 1.

    Pure filter; applying it twice equals applying it once.
    """
    excluded: set[str] = set()
    out: list[VisitDataset] = []
    for ds in visits:
        keep = np.array([iid not in excluded for iid in ds.ids], dtype=bool)
        out.append(VisitDataset(
            visit=ds.visit,
            ids=tuple(iid for iid, k in zip(ds.ids, keep) if k),
            X=ds.X[keep],
            y_next=ds.y_next[keep],
            present_features=ds.present_features,
        ))
        excluded |= {iid for iid, y, k in zip(ds.ids, ds.y_next, keep) if k and y == 1}
    return out


def missing_feature_set(cohort: Cohort, v: int) -> tuple[int, ...]:
    """Schema indices measured at visit 1 but absent at visit v; empty for v=1."""
    ds = cohort.visit(v)
    all_idx = set(range(len(cohort.schema.features)))
    return tuple(sorted(all_idx - set(ds.present_features)))


# ---------------------------------------------------------------------------
# config + file IO

@dataclass
class CohortConfig:
    schema: FeatureSchema
    partition: FeaturePartition
    cost_model: CostModel
    bounds: Bounds
    visit_files: tuple[str, ...]


def _cost_value(raw) -> float:
    if raw is None:
        return float("inf")
    value = float(raw)
    if value < 0:
        raise ConfigError("costs must be non-negative")
    return value


def parse_config(payload: dict) -> CohortConfig:
    try:
        features = tuple(Feature(f["name"], f["kind"], f.get("unit", ""))
                         for f in payload["features"])
        schema = FeatureSchema(features, version=str(payload.get("version", "1")))
        part = payload["partition"]
        partition = FeaturePartition.from_names(
            schema, part["unchangeable"], part["indirect"], part["direct"])
        partition.validate_cover(len(features))

        d_idx = tuple(sorted(partition.direct))
        d_names = [schema.features[j].name for j in d_idx]
        costs = payload["costs"]
        bounds = payload["bounds"]
        c_plus, c_minus, lo, hi = [], [], [], []
        for name in d_names:
            if name not in costs:
                raise ConfigError(f"missing cost entry for direct feature {name!r}")
            if name not in bounds:
                raise ConfigError(f"missing bounds entry for direct feature {name!r}")
            c_plus.append(_cost_value(costs[name].get("increase")))
            c_minus.append(_cost_value(costs[name].get("decrease")))
            lo.append(float(bounds[name]["lower"]))
            hi.append(float(bounds[name]["upper"]))
        cost_model = CostModel(d_indices=d_idx, c_plus=np.array(c_plus),
                               c_minus=np.array(c_minus), names=tuple(d_names))
        bound_spec = Bounds(d_indices=d_idx, lower=np.array(lo), upper=np.array(hi))
        visit_files = tuple(entry["file"] for entry in
                            sorted(payload["visits"], key=lambda e: e["visit"]))
        return CohortConfig(schema, partition, cost_model, bound_spec, visit_files)
    except KeyError as exc:
        raise ConfigError(f"cohort config missing key {exc.args[0]!r}")


def load_config(path) -> CohortConfig:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read cohort config {path}: {exc}")
    return parse_config(payload)


def _read_visit_file(path: Path, v: int, schema: FeatureSchema) -> VisitDataset:
    try:
        frame = pd.read_csv(path, dtype={"id": str}, float_precision="round_trip")
    except (OSError, pd.errors.ParserError) as exc:
        raise DataError(f"cannot read visit file {path}: {exc}")
    for required in ("id", "y_next"):
        if required not in frame.columns:
            raise DataError(f"visit file {path} lacks the {required!r} column")
    feature_cols = [c for c in frame.columns if c not in ("id", "y_next")]
    unknown = [c for c in feature_cols if c not in schema.names]
    if unknown:
        raise DataError(f"visit file {path} has columns outside the schema: {unknown}")
    present = tuple(sorted(schema.index_of(c) for c in feature_cols))
    ordered_names = [schema.features[j].name for j in present]
    X = frame[ordered_names].to_numpy(dtype=float)
    if not np.isfinite(X).all():
        raise DataError(f"non-finite feature values in {path}")
    for col, j in enumerate(present):
        if schema.features[j].kind == "binary" and not np.isin(X[:, col], (0.0, 1.0)).all():
            raise DataError(
                f"binary feature {schema.features[j].name!r} has non-0/1 values in {path}")
    y_raw = frame["y_next"].to_numpy()
    if not np.isin(y_raw, (0, 1)).all():
        raise DataError(f"non-binary outcome values in {path}")
    return VisitDataset(visit=v, ids=tuple(frame["id"].tolist()), X=X,
                        y_next=y_raw.astype(int), present_features=present)


def load_cohort(path, config: CohortConfig | None = None) -> Cohort:
    """Read a cohort directory (visit files + `cohort.json`) and validate it."""
    root = Path(path)
    if config is None:
        config = load_config(root / "cohort.json")
    visits = tuple(_read_visit_file(root / fname, v + 1, config.schema)
                   for v, fname in enumerate(config.visit_files))
    cohort = Cohort(schema=config.schema, partition=config.partition, visits=visits,
                    cost_model=config.cost_model, bounds=config.bounds)
    validate_cohort(cohort)
    return cohort


def config_payload(cohort: Cohort, visit_files: list[str]) -> dict:
    d_names = list(cohort.cost_model.names or ())
    costs = {}
    for j, name in enumerate(d_names):
        cp = cohort.cost_model.c_plus[j]
        cm = cohort.cost_model.c_minus[j]
        costs[name] = {"increase": None if not np.isfinite(cp) else float(cp),
                       "decrease": None if not np.isfinite(cm) else float(cm)}
    bounds = {name: {"lower": float(cohort.bounds.lower[j]), "upper": float(cohort.bounds.upper[j])}
              for j, name in enumerate(d_names)}
    return {
        "version": cohort.schema.version,
        "features": [{"name": f.name, "kind": f.kind, "unit": f.unit}
                     for f in cohort.schema.features],
        "partition": {
            "unchangeable": [cohort.schema.features[j].name for j in cohort.partition.unchangeable],
            "indirect": [cohort.schema.features[j].name for j in cohort.partition.indirect],
            "direct": [cohort.schema.features[j].name for j in cohort.partition.direct],
        },
        "costs": costs,
        "bounds": bounds,
        "visits": [{"visit": v + 1, "file": fname} for v, fname in enumerate(visit_files)],
    }


def write_cohort(cohort: Cohort, outdir) -> None:
    """Emit the visit files and config in the same format `load_cohort` reads."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    visit_files = []
    for ds in cohort.visits:
        names = [cohort.schema.features[j].name for j in ds.present_features]
        lines = [",".join(["id"] + names + ["y_next"])]
        for r, iid in enumerate(ds.ids):
            # repr keeps the shortest exact decimal so loads are bit-faithful
            cells = [iid] + [repr(v) for v in ds.X[r].tolist()] + [str(int(ds.y_next[r]))]
            lines.append(",".join(cells))
        fname = f"visit{ds.visit}.csv"
        (outdir / fname).write_text("\n".join(lines) + "\n")
        visit_files.append(fname)
    (outdir / "cohort.json").write_text(
        json.dumps(config_payload(cohort, visit_files), indent=2, sort_keys=True))
