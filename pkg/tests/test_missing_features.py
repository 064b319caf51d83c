import numpy as np
import pytest

from conftest import tiny_cohort
from riskrec.errors import DataError
from riskrec.missing_features import (
    carry_forward,
    enrich,
    enrich_carry,
    evaluate_estimators,
    fit_plan,
)
from riskrec.synth import GeneratorSpec, generate


class TestFitPlan:
    def test_no_missing_features_empty_plan(self):
        cohort = generate(GeneratorSpec(n1=60, seed=1, event_rate=0.05,
                                        missing_schedule=((), ())))
        plan = fit_plan(cohort, 2)
        assert plan.empty
        enriched = enrich(plan, cohort.visit(2))
        col_of = {j: c for c, j in enumerate(cohort.visit(2).present_features)}
        expect = cohort.visit(2).X[:, [col_of[j] for j in sorted(col_of)]]
        assert np.array_equal(enriched.X, expect)

    def test_default_kinds_by_feature_type(self, small_cohort):
        plan = fit_plan(small_cohort, 2)
        for m, kind in plan.kinds.items():
            feat = small_cohort.schema.features[m]
            assert kind == ("ridge" if feat.kind == "continuous" else "logistic")

    def test_visit1_required(self, small_cohort):
        with pytest.raises(DataError):
            fit_plan(small_cohort, 1)


class TestEnrich:
    def test_dimension_law(self, small_cohort):
        for v in (2, 3):
            plan = fit_plan(small_cohort, v)
            enriched = enrich(plan, small_cohort.visit(v))
            assert enriched.X.shape[1] == len(small_cohort.schema.features)
            assert np.isfinite(enriched.X).all()
            assert enriched.feature_cols == tuple(sorted(small_cohort.visit(v).present_features)) \
                + plan.missing

    def test_constant_mean_estimator(self):
        cohort = tiny_cohort()
        plan = fit_plan(cohort, 2)

        class ConstantMean:
            def __init__(self, value):
                self.value = value

            def predict(self, X):
                return np.full(np.atleast_2d(X).shape[0], self.value)

        visit1 = cohort.visit(1)
        m = plan.missing[0]
        col = {j: c for c, j in enumerate(visit1.present_features)}[m]
        mean_value = visit1.X[:, col].mean()
        plan.estimators[m] = ConstantMean(mean_value)
        enriched = enrich(plan, cohort.visit(2))
        appended = enriched.X[:, -1]
        assert np.allclose(appended, mean_value)

    def test_binary_estimates_thresholded(self, small_cohort):
        plan = fit_plan(small_cohort, 3)
        binary_missing = [m for m in plan.missing
                          if small_cohort.schema.features[m].kind == "binary"]
        enriched = enrich(plan, small_cohort.visit(3))
        pos = {j: c for c, j in enumerate(enriched.feature_cols)}
        for m in binary_missing:
            values = enriched.X[:, pos[m]]
            assert set(np.unique(values)) <= {0.0, 1.0}
            assert str(m) in enriched.estimate_probs

    def test_permutation_equivariance(self, small_cohort):
        from riskrec.cohort import VisitDataset

        plan = fit_plan(small_cohort, 2)
        ds = small_cohort.visit(2)
        r = np.random.default_rng(3)
        perm = r.permutation(ds.n)
        shuffled = VisitDataset(visit=2, ids=tuple(ds.ids[k] for k in perm), X=ds.X[perm],
                                y_next=ds.y_next[perm], present_features=ds.present_features)
        enriched = enrich(plan, ds)
        enriched_shuffled = enrich(plan, shuffled)
        assert np.allclose(enriched.X[perm], enriched_shuffled.X)


class TestCarryForward:
    def test_values_come_from_visit1(self, small_cohort):
        imputed = carry_forward(small_cohort, 2)
        missing = sorted(set(range(len(small_cohort.schema.features)))
                         - set(small_cohort.visit(2).present_features))
        visit1 = small_cohort.visit(1)
        col1 = {j: c for c, j in enumerate(visit1.present_features)}
        row1 = {iid: r for r, iid in enumerate(visit1.ids)}
        for r, iid in enumerate(small_cohort.visit(2).ids[:20]):
            for k, m in enumerate(missing):
                assert imputed[r, k] == visit1.X[row1[iid], col1[m]]

    def test_equivalent_to_memorizing_estimators(self, small_cohort):
        imputed = carry_forward(small_cohort, 2)
        enriched = enrich_carry(small_cohort, 2)
        n_present = len(small_cohort.visit(2).present_features)
        assert np.array_equal(enriched.X[:, n_present:], imputed)

    def test_drifting_features_favor_learned_estimator(self):
        cohort = generate(GeneratorSpec(n1=600, seed=6, event_rate=0.05))
        holdout = [cohort.schema.features[j].name
                   for j in sorted(cohort.partition.indirect)
                   if j in set(cohort.visit(2).present_features)][:2]
        rows = evaluate_estimators(cohort, 2, holdout, kinds=["ridge"])
        by_feature = {}
        for row in rows:
            by_feature.setdefault(row["feature"], {})[row["kind"]] = row["value"]
        wins = sum(1 for cells in by_feature.values() if cells["ridge"] < cells["carry"])
        assert wins >= 1

    def test_zero_drift_makes_carry_exact(self):
        spec = GeneratorSpec(n1=100, seed=7, event_rate=0.05, drift_scale=0.0,
                             indirect_noise=0.0, binary_flip_prob=0.0)
        cohort = generate(spec)
        missing_cont = [j for j in sorted(set(range(24)) - set(cohort.visit(2).present_features))
                        if cohort.schema.features[j].kind == "continuous"]
        imputed = carry_forward(cohort, 2)
        missing = sorted(set(range(24)) - set(cohort.visit(2).present_features))
        visit2 = cohort.visit(2)
        # continuous features are constant across visits, so carried values are
        # exact; binary med-use columns may still flip through fresh sampling
        truth_by_idx = {}
        full = generate(GeneratorSpec(**{**spec.__dict__, "missing_schedule": ((), ())}))
        col_full = {j: c for c, j in enumerate(full.visit(2).present_features)}
        row_full = {iid: r for r, iid in enumerate(full.visit(2).ids)}
        for k, m in enumerate(missing):
            if m not in missing_cont:
                continue
            for r, iid in enumerate(visit2.ids):
                assert imputed[r, k] == full.visit(2).X[row_full[iid], col_full[m]]


class TestEvaluateEstimators:
    def test_oracle_estimator_wins(self, small_cohort):
        ds = small_cohort.visit(2)
        present_cont = [j for j in ds.present_features
                        if small_cohort.schema.features[j].kind == "continuous"]
        name = small_cohort.schema.features[present_cont[-1]].name
        col = {j: c for c, j in enumerate(ds.present_features)}[present_cont[-1]]
        truth = ds.X[:, col]

        class TruthOracle:
            def predict(self, X):
                return truth[: np.atleast_2d(X).shape[0]]

        rows = evaluate_estimators(small_cohort, 2, [name],
                                   kinds=[("oracle", lambda *a: TruthOracle()), "ridge"])
        values = {r["kind"]: r["value"] for r in rows}
        assert values["oracle"] == 0.0
        assert values["carry"] > 0.0

    def test_constant_estimator_auc_half(self, small_cohort):
        binary_present = [j for j in small_cohort.visit(2).present_features
                          if small_cohort.schema.features[j].kind == "binary"]
        ds = small_cohort.visit(2)
        col = {j: c for c, j in enumerate(ds.present_features)}
        target = next(j for j in binary_present if np.unique(ds.X[:, col[j]]).size == 2)
        name = small_cohort.schema.features[target].name

        class Constant:
            def predict_proba(self, X):
                return np.full(np.atleast_2d(X).shape[0], 0.42)

        rows = evaluate_estimators(small_cohort, 2, [name],
                                   kinds=[("const", lambda *a: Constant())])
        values = {r["kind"]: r["value"] for r in rows}
        assert values["const"] == 0.5

    def test_table_shape(self, small_cohort):
        ds = small_cohort.visit(2)
        cont = [small_cohort.schema.features[j].name for j in ds.present_features
                if small_cohort.schema.features[j].kind == "continuous"][:3]
        rows = evaluate_estimators(small_cohort, 2, cont, kinds=["ridge", "knn", "cart"])
        assert len(rows) == len(cont) * 4  # carry + three estimators
        assert {r["metric"] for r in rows} == {"mse"}

    def test_absent_holdout_rejected(self, small_cohort):
        missing = sorted(set(range(24)) - set(small_cohort.visit(2).present_features))
        name = small_cohort.schema.features[missing[0]].name
        with pytest.raises(DataError):
            evaluate_estimators(small_cohort, 2, [name])


def test_write_score_table_round_trips(tmp_path, small_cohort):
    from riskrec.missing_features import write_score_table

    ds = small_cohort.visit(2)
    cont = [small_cohort.schema.features[j].name for j in ds.present_features
            if small_cohort.schema.features[j].kind == "continuous"][:2]
    rows = evaluate_estimators(small_cohort, 2, cont, kinds=["ridge"])
    path = tmp_path / "scores.csv"
    write_score_table(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "feature,kind,metric_name,value"
    assert len(lines) == len(rows) + 1
    for line, row in zip(lines[1:], rows):
        feature, kind, metric, value = line.split(",")
        assert feature == row["feature"] and kind == row["kind"]
        assert float(value) == row["value"]
