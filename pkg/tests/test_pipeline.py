import json

import numpy as np
import pytest

from riskrec.cohort import Cohort, VisitDataset
from riskrec.errors import DataError
from riskrec.models.metrics import auc
from riskrec.models.serialize import model_to_dict
from riskrec.pipeline import (
    ExperimentReport,
    ModelConfig,
    emit_series,
    experiment1,
    experiment2,
    experiment3,
    load_artifacts,
    parse_series,
    save_artifacts,
    split_ids,
    train_all,
    write_report,
)
from riskrec.synth import GeneratorSpec, generate


class TestTrainAll:
    def test_dimension_law(self, small_artifacts):
        p1 = len(small_artifacts.cohort.schema.features)
        dims = [clf.n_features for clf in small_artifacts.classifiers]
        assert dims == [p1, p1 + 1, p1 + 2]

    def test_single_visit_cohort(self):
        cohort = generate(GeneratorSpec(n1=150, n_visits=1, seed=8, event_rate=0.08,
                                        missing_schedule=()))
        arts = train_all(cohort, ModelConfig(), seed=0)
        assert len(arts.classifiers) == 1
        assert arts.plans == []
        assert arts.reps[0].n_risk == 0

    def test_heldout_auc_above_floor(self, default_artifacts):
        for v in (1, 2, 3):
            rep = default_artifacts.reps[v - 1]
            rows = default_artifacts.test_rows(v)
            score = auc(default_artifacts.classifiers[v - 1].predict_proba(rep.matrix[rows]),
                        rep.base.y_next[rows])
            assert score > 0.7, f"visit {v} auc {score}"

    def test_split_disjoint_and_sized(self, small_cohort):
        train, test = split_ids(small_cohort, 0.3, seed=5)
        assert not (set(train) & set(test))
        assert len(train) + len(test) == small_cohort.visit(1).n
        assert abs(len(test) - 0.3 * small_cohort.visit(1).n) <= 1

    def test_train_test_hygiene_by_parameter_hash(self, small_cohort):
        config = ModelConfig()
        arts = train_all(small_cohort, config, seed=7)
        test_set = set(arts.test_ids)

        # scramble every test row's features; fitted parameters must not move
        scrambled_visits = []
        r = np.random.default_rng(0)
        for ds in small_cohort.visits:
            X = ds.X.copy()
            for row, iid in enumerate(ds.ids):
                if iid in test_set:
                    cont = [c for c, j in enumerate(ds.present_features)
                            if small_cohort.schema.features[j].kind == "continuous"]
                    X[row, cont] += r.normal(scale=5.0, size=len(cont))
            scrambled_visits.append(VisitDataset(visit=ds.visit, ids=ds.ids, X=X,
                                                 y_next=ds.y_next,
                                                 present_features=ds.present_features))
        scrambled = Cohort(schema=small_cohort.schema, partition=small_cohort.partition,
                           visits=tuple(scrambled_visits), cost_model=small_cohort.cost_model,
                           bounds=small_cohort.bounds)
        arts2 = train_all(scrambled, config, seed=7)
        for a, b in zip(arts.classifiers, arts2.classifiers):
            assert json.dumps(model_to_dict(a), sort_keys=True) == \
                json.dumps(model_to_dict(b), sort_keys=True)
        for a, b in zip(arts.indirects, arts2.indirects):
            assert json.dumps(model_to_dict(a), sort_keys=True) == \
                json.dumps(model_to_dict(b), sort_keys=True)
        for pa, pb in zip(arts.plans, arts2.plans):
            for m in pa.estimators:
                assert json.dumps(model_to_dict(pa.estimators[m]), sort_keys=True) == \
                    json.dumps(model_to_dict(pb.estimators[m]), sort_keys=True)


class TestExperiment1:
    def test_report_shape(self, small_cohort):
        report = experiment1(small_cohort, ModelConfig(), seed=3)
        assert report.experiment == 1
        holdout = report.config["holdout"]
        assert len(holdout) == 4  # 3 continuous + 1 binary
        features = {r["feature"] for r in report.tables["scores"]}
        assert features == set(holdout)
        kinds = {r["kind"] for r in report.tables["scores"]}
        assert "carry" in kinds

    def test_oracle_wins_when_included(self, small_cohort):
        ds = small_cohort.visit(2)
        present = set(ds.present_features)
        cont = [small_cohort.schema.features[j].name
                for j in sorted(small_cohort.partition.indirect) if j in present][:1]
        col = {small_cohort.schema.features[j].name: c
               for c, j in enumerate(ds.present_features)}

        def oracle_factory(X1, t1, mask, name):
            truth = ds.X[:, col[name]]

            class Oracle:
                def predict(self, X):
                    return truth[: np.atleast_2d(X).shape[0]]

            return Oracle()

        report = experiment1(small_cohort, ModelConfig(), seed=3, holdout=cont,
                             kinds=[("oracle", oracle_factory), "ridge"])
        winner = report.tables["winners"][0]
        assert winner["winner"] == "oracle"

    def test_zero_drift_carry_wins(self):
        cohort = generate(GeneratorSpec(n1=200, seed=11, event_rate=0.05, drift_scale=0.0,
                                        indirect_noise=0.0, binary_flip_prob=0.0))
        report = experiment1(cohort, ModelConfig(), seed=11)
        for row in report.tables["winners"]:
            if row["metric"] == "mse":
                assert row["winner"] == "carry"
                assert row["carry_value"] == 0.0


class TestExperiment2:
    def test_series_shape_and_gap_sign(self, small_cohort, small_artifacts):
        report = experiment2(small_cohort, ModelConfig(), seed=3, artifacts=small_artifacts)
        visits = sorted({row["visit"] for row in report.series})
        assert visits == [2, 3]
        arms = {row["arm"] for row in report.series}
        assert arms == {"risk_features", "carry_forward"}
        for gap_row in report.tables["auc_gaps"]:
            risk = next(r["value"] for r in report.series
                        if r["visit"] == gap_row["visit"] and r["arm"] == "risk_features")
            carry = next(r["value"] for r in report.series
                         if r["visit"] == gap_row["visit"] and r["arm"] == "carry_forward")
            assert abs(gap_row["auc_gap"] - (risk - carry)) < 1e-12

    def test_requires_two_visits(self):
        cohort = generate(GeneratorSpec(n1=150, n_visits=1, seed=8, event_rate=0.08,
                                        missing_schedule=()))
        with pytest.raises(DataError):
            experiment2(cohort, ModelConfig(), seed=0)

    def test_history_free_ablation_gap_near_zero(self):
        # visits carry literally identical rows, so both arms see the same
        # information and the gap reduces to fit noise
        spec = GeneratorSpec(n1=800, n_visits=2, seed=2, event_rate=0.15,
                             n_unchangeable_binary=0, drift_scale=0.0,
                             indirect_noise=0.0, binary_flip_prob=0.0,
                             missing_schedule=((),), dropout_rate=0.0)
        cohort = generate(spec)
        v1, v2 = cohort.visit(1), cohort.visit(2)
        row1 = {i: r for r, i in enumerate(v1.ids)}
        assert all(np.array_equal(v2.X[r], v1.X[row1[i]]) for r, i in enumerate(v2.ids))
        report = experiment2(cohort, ModelConfig(), seed=2)
        gap = report.tables["auc_gaps"][0]["auc_gap"]
        assert abs(gap) < 0.02


class TestExperiment3:
    def test_zero_budget_series_identical(self, small_cohort, small_artifacts):
        report = experiment3(small_cohort, ModelConfig(), seed=3, budget=0.0,
                             artifacts=small_artifacts)
        values = {}
        for row in report.series:
            values.setdefault(row["visit"], {})[row["arm"]] = row["value"]
        for v, arms in values.items():
            assert arms["baseline"] == arms["optimize_v1"] == arms["optimize_v1_v2"]

    def test_budget2_ordering(self, small_cohort, small_artifacts):
        report = experiment3(small_cohort, ModelConfig(), seed=3, budget=2.0,
                             artifacts=small_artifacts)
        values = {}
        for row in report.series:
            values.setdefault(row["visit"], {})[row["arm"]] = row["value"]
        for v in (2, 3):
            assert values[v]["optimize_v1"] <= values[v]["baseline"]
            assert values[v]["optimize_v1_v2"] <= values[v]["baseline"]
        assert values[2]["optimize_v1_v2"] <= values[2]["optimize_v1"] + 1e-12
        for row in report.tables["feasibility"]:
            assert row["cost"] <= row["budget"] + 1e-9

    def test_requires_three_visits(self):
        cohort = generate(GeneratorSpec(n1=120, n_visits=2, seed=8, event_rate=0.08,
                                        missing_schedule=((),)))
        with pytest.raises(DataError):
            experiment3(cohort, ModelConfig(), seed=0)


class TestReportIO:
    def test_emit_and_parse_round_trip(self, tmp_path):
        report = ExperimentReport(experiment=3, config={"seed": 0}, tables={},
                                  series=[{"visit": v, "arm": a, "value": 0.1 * v + len(a) * 1e-7}
                                          for v in (1, 2, 3)
                                          for a in ("baseline", "optimize_v1", "optimize_v1_v2")],
                                  seeds=[0])
        path = tmp_path / "series.csv"
        emit_series(report, path)
        parsed = parse_series(path)
        assert len(parsed) == 9
        key = lambda r: (r["visit"], r["arm"])
        for got, want in zip(parsed, sorted(report.series, key=key)):
            assert got == want

    def test_emit_stable_bytes(self, tmp_path):
        report = ExperimentReport(experiment=1, config={}, tables={},
                                  series=[{"visit": 2, "arm": "b", "value": 1 / 3},
                                          {"visit": 2, "arm": "a", "value": 2 / 3}],
                                  seeds=[1])
        emit_series(report, tmp_path / "one.csv")
        emit_series(report, tmp_path / "two.csv")
        assert (tmp_path / "one.csv").read_bytes() == (tmp_path / "two.csv").read_bytes()

    def test_write_report_excludes_wall_clock(self, tmp_path, small_cohort):
        report = experiment1(small_cohort, ModelConfig(), seed=3)
        assert report.wall_clock is not None
        write_report(report, tmp_path / "run")
        payload = json.loads((tmp_path / "run" / "report.json").read_text())
        assert "wall_clock" not in json.dumps(payload)
        assert (tmp_path / "run" / "run_meta.txt").exists()


class TestArtifactPersistence:
    def test_save_load_round_trip(self, tmp_path, small_cohort, small_artifacts):
        save_artifacts(small_artifacts, tmp_path)
        loaded = load_artifacts(tmp_path, small_cohort)
        assert loaded.train_ids == small_artifacts.train_ids
        assert loaded.test_ids == small_artifacts.test_ids
        rows = small_artifacts.test_rows(2)
        rep = small_artifacts.reps[1]
        a = small_artifacts.classifiers[1].predict_proba(rep.matrix[rows])
        b = loaded.classifiers[1].predict_proba(loaded.reps[1].matrix[rows])
        assert np.allclose(a, b)
