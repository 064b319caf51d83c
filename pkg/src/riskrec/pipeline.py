"""Training orchestration and the three evaluation experiments.

`train_all` builds, in visit order: missing-feature plans, enriched and
risk-augmented matrices, per-visit classifiers, and per-visit indirect
estimators, all fitted on a 30% id-held-out train split. The experiments
compare estimator quality (1), risk features vs carried-forward history (2),
and early vs repeated inverse classification (3).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from riskrec.cohort import Cohort
from riskrec.errors import DataError, ModelError
from riskrec.indirect import KernelRegressor, fit_indirect
from riskrec.inverse_opt import BudgetSpec, SolverOptions, optimize
from riskrec.missing_features import EnrichedInstance, enrich, evaluate_estimators, fit_plan
from riskrec.models.metrics import auc
from riskrec.models.serialize import model_from_dict, model_to_dict
from riskrec.models.svm import fit_svm
from riskrec.risk_features import (
    RiskAugmentedVisit,
    augment_with_carryforward,
    augment_with_risk,
    estimate_risk,
)


@dataclass
class ModelConfig:
    kernel: str = "rbf"
    c_reg: float = 1.0
    gamma: object = "auto"
    platt_folds: int = 3
    test_fraction: float = 0.3
    bandwidth: object = "auto"
    estimator_kinds: dict = field(default_factory=dict)
    solver: SolverOptions = field(default_factory=SolverOptions)

    def snapshot(self) -> dict:
        return {
            "kernel": self.kernel,
            "c_reg": self.c_reg,
            "gamma": self.gamma,
            "platt_folds": self.platt_folds,
            "test_fraction": self.test_fraction,
            "bandwidth": self.bandwidth,
            "estimator_kinds": dict(self.estimator_kinds),
        }


@dataclass
class TrainedArtifacts:
    cohort: Cohort
    config: ModelConfig
    seed: int
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    classifiers: list
    indirects: list[KernelRegressor]
    plans: list
    reps: list[RiskAugmentedVisit]

    def __post_init__(self):
        self.row_index = [{iid: r for r, iid in enumerate(rep.base.ids)} for rep in self.reps]

    def instance(self, iid: str, v: int) -> EnrichedInstance:
        idx = self.row_index[v - 1]
        if iid not in idx:
            raise DataError(f"unknown instance {iid!r} at visit {v}")
        return self.reps[v - 1].instance(idx[iid])

    def budget_spec(self, budget: float) -> BudgetSpec:
        return BudgetSpec(budget, self.cohort.bounds.lower.copy(),
                          self.cohort.bounds.upper.copy())

    def train_rows(self, v: int) -> np.ndarray:
        keep = set(self.train_ids)
        return np.array([r for r, iid in enumerate(self.reps[v - 1].base.ids) if iid in keep],
                        dtype=int)

    def test_rows(self, v: int) -> np.ndarray:
        keep = set(self.test_ids)
        return np.array([r for r, iid in enumerate(self.reps[v - 1].base.ids) if iid in keep],
                        dtype=int)


def split_ids(cohort: Cohort, test_fraction: float, seed: int) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Held-out test ids drawn at visit 1; the same id split applies at every visit."""
    ids = list(cohort.visit(1).ids)
    rng = np.random.default_rng([seed, 23])
    order = rng.permutation(len(ids))
    n_test = int(round(test_fraction * len(ids)))
    test = {ids[k] for k in order[:n_test]}
    train = tuple(i for i in ids if i not in test)
    return train, tuple(i for i in ids if i in test)


def _rep_continuous_mask(cohort: Cohort, rep: RiskAugmentedVisit) -> np.ndarray:
    feature_mask = cohort.schema.continuous_mask(rep.base.feature_cols)
    return np.concatenate([feature_mask, np.ones(rep.n_risk, dtype=bool)])


def _indirect_io(cohort: Cohort, rep: RiskAugmentedVisit):
    """Column positions for the indirect estimator: (U + risk) context, D inputs, I targets."""
    pos = {j: c for c, j in enumerate(rep.base.feature_cols)}
    u_pos = [pos[j] for j in sorted(cohort.partition.unchangeable)]
    d_pos = [pos[j] for j in sorted(cohort.partition.direct)]
    i_pos = [pos[j] for j in sorted(cohort.partition.indirect)]
    p1 = len(rep.base.feature_cols)
    risk_pos = list(range(p1, p1 + rep.n_risk))
    return u_pos, risk_pos, d_pos, i_pos


def train_all(cohort: Cohort, config: Optional[ModelConfig] = None, seed: int = 0) -> TrainedArtifacts:
    """Fit per-visit classifiers, indirect estimators, and missing-feature plans.

    Visits train in order because each visit's risk columns come from the
    earlier visits' fitted classifiers. All parameters and standardization
    statistics derive from the train split only; test rows are only ever
    pushed through already-fitted models.
    """
    config = config or ModelConfig()
    train_ids, test_ids = split_ids(cohort, config.test_fraction, seed)
    train_set = set(train_ids)

    classifiers: list = []
    indirects: list[KernelRegressor] = []
    plans: list = []
    reps: list[RiskAugmentedVisit] = []
    oof_probs: list[dict] = []  # per visit: train id -> out-of-fold probability
    for v in range(1, cohort.n_visits + 1):
        if v >= 2:
            try:
                plan = fit_plan(cohort, v, kinds=config.estimator_kinds, train_ids=train_ids)
            except ModelError as exc:
                raise ModelError(f"visit {v}: {exc}") from exc
            plans.append(plan)
        rep = augment_with_risk(cohort, classifiers, v, plans=plans, reps=reps) if v >= 2 else \
            _visit1_rep(cohort)
        if rep.n_risk:
            # training rows carry out-of-fold risk so the downstream fit does
            # not read its own upstream classifier's in-sample scores
            for k in range(rep.n_risk):
                for r, iid in enumerate(rep.base.ids):
                    oof = oof_probs[k].get(iid)
                    if oof is not None:
                        rep.risk[r, k] = oof
        reps.append(rep)

        train_rows = np.array([r for r, iid in enumerate(rep.base.ids) if iid in train_set],
                              dtype=int)
        X = rep.matrix
        y = rep.base.y_next
        mask = _rep_continuous_mask(cohort, rep)
        try:
            clf = fit_svm(X[train_rows], y[train_rows], kernel=config.kernel,
                          c_reg=config.c_reg, gamma=config.gamma, continuous_mask=mask,
                          platt_folds=config.platt_folds)
        except ModelError as exc:
            raise ModelError(f"visit {v} classifier: {exc}") from exc
        clf.model_id = f"f_v{v}"
        classifiers.append(clf)
        oof_probs.append({iid: float(p) for iid, p in
                          zip((rep.base.ids[r] for r in train_rows), clf.oof_proba_)})

        u_pos, risk_pos, d_pos, i_pos = _indirect_io(cohort, rep)
        ctx_cols = u_pos + risk_pos + d_pos
        ctx_mask = np.concatenate([
            cohort.schema.continuous_mask([rep.base.feature_cols[c] for c in u_pos]),
            np.ones(len(risk_pos), dtype=bool),
            cohort.schema.continuous_mask([rep.base.feature_cols[c] for c in d_pos]),
        ])
        if i_pos:
            H = fit_indirect(X[np.ix_(train_rows, ctx_cols)], X[np.ix_(train_rows, i_pos)],
                             bandwidth=config.bandwidth, continuous_mask=ctx_mask)
        else:
            H = None
        indirects.append(H)

    return TrainedArtifacts(cohort=cohort, config=config, seed=seed, train_ids=train_ids,
                            test_ids=test_ids, classifiers=classifiers, indirects=indirects,
                            plans=plans, reps=reps)


def _visit1_rep(cohort: Cohort) -> RiskAugmentedVisit:
    from riskrec.missing_features import EnrichedVisit

    ds = cohort.visit(1)
    present = tuple(sorted(ds.present_features))
    col_of = {j: c for c, j in enumerate(ds.present_features)}
    X = ds.X[:, [col_of[j] for j in present]]
    base = EnrichedVisit(visit=1, ids=tuple(ds.ids), X=X, y_next=ds.y_next.copy(),
                         feature_cols=present)
    return RiskAugmentedVisit(base=base, risk=np.empty((len(ds.ids), 0)), provenance=())


# ---------------------------------------------------------------------------
# experiment reports

@dataclass
class ExperimentReport:
    experiment: int
    config: dict
    tables: dict
    series: list[dict]
    seeds: list[int]
    wall_clock: Optional[float] = None

    def to_payload(self) -> dict:
        # wall clock is observational; the canonical payload must be a pure
        # function of (config, seed)
        return {
            "experiment": self.experiment,
            "config": self.config,
            "tables": self.tables,
            "series": self.series,
            "seeds": self.seeds,
        }


def _config_snapshot(config: ModelConfig, seed: int, extra: dict | None = None) -> dict:
    snap = {"model": config.snapshot(), "seed": seed}
    if extra:
        snap.update(extra)
    return snap


def default_holdout(cohort: Cohort, v: int, seed: int) -> tuple[list[str], list[str]]:
    """Three present continuous indirect features plus a present binary feature."""
    present = set(cohort.visit(v).present_features)
    cont = [j for j in sorted(cohort.partition.indirect)
            if j in present and cohort.schema.features[j].kind == "continuous"]
    if len(cont) < 3:
        raise DataError("need at least 3 present continuous indirect features")
    rng = np.random.default_rng([seed, 31])
    chosen = sorted(rng.choice(len(cont), size=3, replace=False).tolist())
    cont_names = [cohort.schema.features[cont[k]].name for k in chosen]
    ds = cohort.visit(v)
    colv = {j: c for c, j in enumerate(ds.present_features)}
    bin_names = []
    for j in sorted(present):
        feat = cohort.schema.features[j]
        if feat.kind == "binary" and np.unique(ds.X[:, colv[j]]).size == 2:
            bin_names.append(feat.name)
            break
    return cont_names, bin_names


def experiment1(cohort: Cohort, config: Optional[ModelConfig] = None, seed: int = 0,
                v: int = 2, holdout: Optional[list[str]] = None,
                kinds: Optional[list] = None) -> ExperimentReport:
    """Missing-feature estimators vs the carry-forward baseline on held-out
    known features."""
    t0 = time.perf_counter()
    config = config or ModelConfig()
    if holdout is None:
        cont_names, bin_names = default_holdout(cohort, v, seed)
        holdout = cont_names + bin_names
    rows = evaluate_estimators(cohort, v, holdout, kinds)
    winners = []
    for name in holdout:
        feat_rows = [r for r in rows if r["feature"] == name]
        metric = feat_rows[0]["metric"]
        best = (min if metric == "mse" else max)(feat_rows, key=lambda r: r["value"])
        carry = next(r for r in feat_rows if r["kind"] == "carry")
        learned = [r for r in feat_rows if r["kind"] != "carry"]
        best_learned = (min if metric == "mse" else max)(learned, key=lambda r: r["value"]) \
            if learned else None
        winners.append({
            "feature": name,
            "metric": metric,
            "winner": best["kind"],
            "carry_value": carry["value"],
            "best_learned_kind": best_learned["kind"] if best_learned else None,
            "best_learned_value": best_learned["value"] if best_learned else None,
            "beats_carry": bool(best_learned is not None and (
                best_learned["value"] < carry["value"] if metric == "mse"
                else best_learned["value"] > carry["value"])),
        })
    report = ExperimentReport(
        experiment=1,
        config=_config_snapshot(config, seed, {"visit": v, "holdout": list(holdout)}),
        tables={"scores": rows, "winners": winners},
        series=[],
        seeds=[seed],
        wall_clock=time.perf_counter() - t0,
    )
    return report


def experiment2(cohort: Cohort, config: Optional[ModelConfig] = None, seed: int = 0,
                artifacts: Optional[TrainedArtifacts] = None) -> ExperimentReport:
    """Held-out AUC of risk-feature classifiers vs carried-forward-history ones."""
    t0 = time.perf_counter()
    config = config or ModelConfig()
    if cohort.n_visits < 2:
        raise DataError("experiment 2 needs at least 2 visits")
    arts = artifacts or train_all(cohort, config, seed)
    series: list[dict] = []
    gaps = []
    for v in range(2, cohort.n_visits + 1):
        rep = arts.reps[v - 1]
        test_rows = arts.test_rows(v)
        y_test = rep.base.y_next[test_rows]
        risk_auc = auc(estimate_risk(arts.classifiers[v - 1], rep.matrix[test_rows]), y_test)

        concat = augment_with_carryforward(cohort, v)
        train_rows = arts.train_rows(v)
        carry_clf = fit_svm(concat.X[train_rows], concat.y_next[train_rows],
                            kernel=config.kernel, c_reg=config.c_reg, gamma=config.gamma,
                            continuous_mask=concat.continuous_mask,
                            platt_folds=config.platt_folds)
        carry_auc = auc(estimate_risk(carry_clf, concat.X[test_rows]), y_test)

        series.append({"visit": v, "arm": "risk_features", "value": float(risk_auc)})
        series.append({"visit": v, "arm": "carry_forward", "value": float(carry_auc)})
        gaps.append({"visit": v, "auc_gap": float(risk_auc - carry_auc)})
    report = ExperimentReport(
        experiment=2,
        config=_config_snapshot(config, seed),
        tables={"auc_gaps": gaps},
        series=series,
        seeds=[seed],
        wall_clock=time.perf_counter() - t0,
    )
    return report


def _modified_rep_row(arts: TrainedArtifacts, v: int, iid: str, d_star_raw: np.ndarray,
                      modified: list[dict]) -> np.ndarray:
    """Counterfactual representation of one instance at visit v under carried
    optimized direct values.

    Present direct columns are overwritten before enrichment (so estimates see
    the optimized lifestyle), every direct column after it; historical-risk
    columns come from the earlier modified representations; indirect features
    are re-estimated through the visit's estimator. Unchangeable features keep
    their observed values.
    """
    from riskrec.cohort import VisitDataset

    cohort = arts.cohort
    ds = cohort.visit(v)
    row = arts.row_index[v - 1][iid]
    raw = ds.X[row].copy()
    d_sorted = sorted(cohort.partition.direct)
    d_value = {j: d_star_raw[k] for k, j in enumerate(d_sorted)}
    col_of = {j: c for c, j in enumerate(ds.present_features)}
    for j, value in d_value.items():
        if j in col_of:
            raw[col_of[j]] = value

    single = VisitDataset(visit=v, ids=(iid,), X=raw[None, :], y_next=np.array([0]),
                          present_features=ds.present_features)
    plan = arts.plans[v - 2]
    enriched = enrich(plan, single)
    values = enriched.X[0]
    pos = {j: c for c, j in enumerate(enriched.feature_cols)}
    for j, value in d_value.items():
        values[pos[j]] = value

    risks = np.empty(v - 1)
    for k in range(1, v):
        earlier = modified[k - 1].get(iid)
        if earlier is None:
            r = arts.row_index[k - 1][iid]
            earlier = arts.reps[k - 1].matrix[r]
        risks[k - 1] = estimate_risk(arts.classifiers[k - 1], earlier[None, :])[0]

    full = np.concatenate([values, risks])
    H = arts.indirects[v - 1]
    i_sorted = sorted(cohort.partition.indirect)
    if H is not None and i_sorted:
        u_posn = [pos[j] for j in sorted(cohort.partition.unchangeable)]
        ctx = np.concatenate([values[u_posn], risks])
        d_vec = np.array([d_value[j] for j in d_sorted])
        i_vals = H.predict(ctx, d_vec)
        for idx, j in enumerate(i_sorted):
            full[pos[j]] = i_vals[idx]
    return full


def experiment3(cohort: Cohort, config: Optional[ModelConfig] = None, seed: int = 0,
                budget: float = 2.0, artifacts: Optional[TrainedArtifacts] = None) -> ExperimentReport:
    """Early vs repeated inverse classification: per-visit mean predicted
    probability for the baseline, an optimize-at-v1 arm, and an arm that also
    re-optimizes at v2.

    A recommendation is adopted (and carried into later visits) only when it
    changes the direct features and the model predicts improvement, so a zero
    budget leaves every arm equal to the baseline.
    """
    t0 = time.perf_counter()
    config = config or ModelConfig()
    if cohort.n_visits != 3:
        raise DataError("experiment 3 is defined for 3-visit cohorts")
    arts = artifacts or train_all(cohort, config, seed)
    spec = arts.budget_spec(budget)
    cost_model = cohort.cost_model
    partition = cohort.partition
    test_set = set(arts.test_ids)
    test_v1 = [iid for iid in arts.reps[0].base.ids if iid in test_set]

    mod_a: list[dict] = [dict() for _ in range(cohort.n_visits)]
    mod_b: list[dict] = [dict() for _ in range(cohort.n_visits)]
    feasibility = []
    d_sorted = sorted(partition.direct)

    for iid in test_v1:
        rec = optimize(arts.classifiers[0], arts.indirects[0], arts.instance(iid, 1),
                       partition, cost_model, spec, arts.config.solver)
        feasibility.append({"id": iid, "visit": 1, "cost": rec.cost_spent,
                            "budget": budget, "changed": rec.changed})
        if rec.changed:
            mod_a[0][iid] = rec.assembled
            for v in range(2, cohort.n_visits + 1):
                if iid in arts.row_index[v - 1]:
                    mod_a[v - 1][iid] = _modified_rep_row(arts, v, iid, rec.after_raw, mod_a)
    # arm (b) continues from arm (a)'s state
    mod_b[0] = dict(mod_a[0])
    v2_ids = [iid for iid in arts.reps[1].base.ids if iid in test_set]
    for iid in v2_ids:
        row = arts.row_index[1][iid]
        start = mod_a[1].get(iid, arts.reps[1].matrix[row])
        start_prob = float(estimate_risk(arts.classifiers[1], start[None, :])[0])
        inst = EnrichedInstance(values=start.copy(), feature_cols=arts.reps[1].base.feature_cols,
                                n_risk=arts.reps[1].n_risk)
        rec2 = optimize(arts.classifiers[1], arts.indirects[1], inst, partition, cost_model,
                        spec, arts.config.solver)
        feasibility.append({"id": iid, "visit": 2, "cost": rec2.cost_spent,
                            "budget": budget, "changed": rec2.changed})
        if rec2.changed and rec2.after_probability <= start_prob:
            mod_b[1][iid] = rec2.assembled
            if iid in arts.row_index[2]:
                mod_b[2][iid] = _modified_rep_row(arts, 3, iid, rec2.after_raw, mod_b)
        elif iid in mod_a[1]:
            mod_b[1][iid] = mod_a[1][iid]
            if iid in mod_a[2]:
                mod_b[2][iid] = mod_a[2][iid]

    series: list[dict] = []
    populations = []
    for v in range(1, cohort.n_visits + 1):
        rep = arts.reps[v - 1]
        rows = [(r, iid) for r, iid in enumerate(rep.base.ids) if iid in test_set]
        baseline = estimate_risk(arts.classifiers[v - 1], rep.matrix[[r for r, _ in rows]])
        arm_values = {"baseline": baseline.mean()}
        for arm, mod in (("optimize_v1", mod_a), ("optimize_v1_v2", mod_b)):
            vals = []
            for (r, iid), base_p in zip(rows, baseline):
                changed = mod[v - 1].get(iid)
                if changed is None:
                    vals.append(base_p)
                else:
                    vals.append(float(estimate_risk(arts.classifiers[v - 1], changed[None, :])[0]))
            arm_values[arm] = float(np.mean(vals))
        populations.append({"visit": v, "n": len(rows)})
        for arm in ("baseline", "optimize_v1", "optimize_v1_v2"):
            series.append({"visit": v, "arm": arm, "value": float(arm_values[arm])})

    report = ExperimentReport(
        experiment=3,
        config=_config_snapshot(config, seed, {"budget": budget}),
        tables={"populations": populations, "feasibility": feasibility},
        series=series,
        seeds=[seed],
        wall_clock=time.perf_counter() - t0,
    )
    return report


# ---------------------------------------------------------------------------
# report IO

def emit_series(report: ExperimentReport, path) -> None:
    """Plot-ready delimited series: one (visit, arm, value) row per point."""
    lines = ["visit,arm,value"]
    for row in sorted(report.series, key=lambda r: (r["visit"], r["arm"])):
        lines.append(f"{row['visit']},{row['arm']},{row['value']!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def parse_series(path) -> list[dict]:
    rows = []
    for line in Path(path).read_text().splitlines()[1:]:
        visit, arm, value = line.split(",")
        rows.append({"visit": int(visit), "arm": arm, "value": float(value)})
    return rows


def write_report(report: ExperimentReport, run_dir) -> None:
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "report.json").write_text(
        json.dumps(report.to_payload(), indent=2, sort_keys=True))
    emit_series(report, run_dir / "series.csv")
    meta = f"wall_clock_seconds={report.wall_clock}\nwritten_at={time.time()}\n"
    (run_dir / "run_meta.txt").write_text(meta)


# ---------------------------------------------------------------------------
# artifact persistence

def save_artifacts(arts: TrainedArtifacts, outdir) -> None:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    payload = {
        "seed": arts.seed,
        "model": arts.config.snapshot(),
        "train_ids": list(arts.train_ids),
        "test_ids": list(arts.test_ids),
        "classifiers": [model_to_dict(c) for c in arts.classifiers],
        "indirects": [None if h is None else model_to_dict(h) for h in arts.indirects],
        "plans": [
            {
                "visit": plan.visit,
                "consumed": list(plan.consumed),
                "missing": list(plan.missing),
                "kinds": {str(k): v for k, v in plan.kinds.items()},
                "estimators": {str(k): model_to_dict(est) for k, est in plan.estimators.items()},
            }
            for plan in arts.plans
        ],
    }
    (outdir / "artifacts.json").write_text(json.dumps(payload, sort_keys=True))


def load_artifacts(path, cohort: Cohort) -> TrainedArtifacts:
    from riskrec.missing_features import MissingFeaturePlan

    payload = json.loads((Path(path) / "artifacts.json").read_text())
    config = ModelConfig(**{k: v for k, v in payload["model"].items()
                            if k in ("kernel", "c_reg", "gamma", "platt_folds",
                                     "test_fraction", "bandwidth", "estimator_kinds")})
    classifiers = [model_from_dict(c) for c in payload["classifiers"]]
    for v, clf in enumerate(classifiers, start=1):
        clf.model_id = f"f_v{v}"
    indirects = [None if h is None else model_from_dict(h) for h in payload["indirects"]]
    plans = [
        MissingFeaturePlan(
            visit=p["visit"],
            consumed=tuple(p["consumed"]),
            missing=tuple(p["missing"]),
            estimators={int(k): model_from_dict(est) for k, est in p["estimators"].items()},
            kinds={int(k): v for k, v in p["kinds"].items()},
        )
        for p in payload["plans"]
    ]
    reps: list[RiskAugmentedVisit] = [_visit1_rep(cohort)]
    for v in range(2, cohort.n_visits + 1):
        reps.append(augment_with_risk(cohort, classifiers, v, plans=plans, reps=reps))
    return TrainedArtifacts(cohort=cohort, config=config, seed=payload["seed"],
                            train_ids=tuple(payload["train_ids"]),
                            test_ids=tuple(payload["test_ids"]),
                            classifiers=classifiers, indirects=indirects, plans=plans,
                            reps=reps)
