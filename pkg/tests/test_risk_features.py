import numpy as np
import pytest

from riskrec.errors import DataError
from riskrec.pipeline import ModelConfig, train_all
from riskrec.risk_features import (
    augment_with_carryforward,
    augment_with_risk,
    build_representations,
    estimate_risk,
)
from riskrec.synth import GeneratorSpec, generate


class ConstantClassifier:
    def __init__(self, value):
        self.value = value
        self.model_id = f"const_{value}"

    def predict_proba(self, X):
        return np.full(np.atleast_2d(X).shape[0], self.value)


class TestEstimateRisk:
    def test_constant_classifier(self, small_cohort):
        ds = small_cohort.visit(1)
        probs = estimate_risk(ConstantClassifier(0.3), ds.X)
        assert probs.shape == (ds.n,)
        assert np.allclose(probs, 0.3)

    def test_mean_risk_near_base_rate(self, small_artifacts):
        arts = small_artifacts
        rep = arts.reps[0]
        rows = arts.test_rows(1)
        probs = estimate_risk(arts.classifiers[0], rep.matrix[rows])
        rate = rep.base.y_next[arts.train_rows(1)].mean()
        assert abs(probs.mean() - rate) < 0.05


class TestAugmentWithRisk:
    def test_single_column_at_v2(self, small_cohort):
        clf = ConstantClassifier(0.25)
        rep = augment_with_risk(small_cohort, [clf], 2)
        assert rep.risk.shape == (small_cohort.visit(2).n, 1)
        assert np.allclose(rep.risk, 0.25)
        assert rep.provenance == ("const_0.25",)

    def test_two_columns_at_v3(self, small_cohort):
        reps = build_representations(small_cohort, [ConstantClassifier(0.2),
                                                    ConstantClassifier(0.6)], 3)
        assert reps[2].risk.shape[1] == 2
        assert np.allclose(reps[2].risk[:, 0], 0.2)
        assert np.allclose(reps[2].risk[:, 1], 0.6)

    def test_column_count_law(self, small_artifacts):
        p1 = len(small_artifacts.cohort.schema.features)
        for v in (1, 2, 3):
            rep = small_artifacts.reps[v - 1]
            assert rep.matrix.shape[1] == p1 + (v - 1)

    def test_pass_through_of_scored_probability(self, small_cohort):
        # an instance's risk column at v2 equals f1 evaluated on its v1 row
        config = ModelConfig()
        arts = train_all(small_cohort, config, seed=1)
        rep1, rep2 = arts.reps[0], arts.reps[1]
        test_ids = [iid for iid in rep2.base.ids if iid in set(arts.test_ids)][:10]
        for iid in test_ids:
            r1 = arts.row_index[0][iid]
            r2 = arts.row_index[1][iid]
            expect = float(estimate_risk(arts.classifiers[0], rep1.matrix[r1][None, :])[0])
            # batch vs single-row kernel evaluation may differ by BLAS ulps
            assert abs(rep2.risk[r2, 0] - expect) < 1e-12

    def test_requires_enough_classifiers(self, small_cohort):
        with pytest.raises(DataError):
            augment_with_risk(small_cohort, [], 2)

    def test_risk_bounded(self, small_artifacts):
        for rep in small_artifacts.reps[1:]:
            assert rep.risk.min() >= 0.0 and rep.risk.max() <= 1.0

    def test_permutation_equivariance(self, small_cohort):
        from riskrec.cohort import Cohort, VisitDataset

        clf = ConstantClassifier(0.4)
        rep = augment_with_risk(small_cohort, [clf], 2)
        ds = small_cohort.visit(2)
        r = np.random.default_rng(1)
        perm = r.permutation(ds.n)
        shuffled_visits = list(small_cohort.visits)
        shuffled_visits[1] = VisitDataset(visit=2, ids=tuple(ds.ids[k] for k in perm),
                                          X=ds.X[perm], y_next=ds.y_next[perm],
                                          present_features=ds.present_features)
        shuffled = Cohort(schema=small_cohort.schema, partition=small_cohort.partition,
                          visits=tuple(shuffled_visits), cost_model=small_cohort.cost_model,
                          bounds=small_cohort.bounds)
        rep_shuffled = augment_with_risk(shuffled, [clf], 2)
        assert np.allclose(rep.base.X[perm], rep_shuffled.base.X)
        assert np.allclose(rep.risk[perm], rep_shuffled.risk)


class TestCarryForwardVectors:
    def test_column_count_sums_visit_widths(self, small_cohort):
        p = [len(ds.present_features) for ds in small_cohort.visits]
        concat2 = augment_with_carryforward(small_cohort, 2)
        assert concat2.X.shape[1] == p[0] + p[1]
        concat3 = augment_with_carryforward(small_cohort, 3)
        assert concat3.X.shape[1] == p[0] + p[1] + p[2]

    def test_visit1_values_verbatim_first(self, small_cohort):
        concat = augment_with_carryforward(small_cohort, 2)
        visit1 = small_cohort.visit(1)
        row1 = {iid: r for r, iid in enumerate(visit1.ids)}
        p1 = len(visit1.present_features)
        for r, iid in enumerate(concat.ids[:10]):
            assert np.array_equal(concat.X[r, :p1], visit1.X[row1[iid]])

    def test_labels_mark_visit_origin(self, small_cohort):
        concat = augment_with_carryforward(small_cohort, 2)
        assert concat.labels[0].startswith("v1:")
        assert concat.labels[-1].startswith("v2:")


def test_write_augmented_round_trips(tmp_path, small_cohort, small_artifacts):
    from riskrec.risk_features import write_augmented

    rep = small_artifacts.reps[1]
    path = tmp_path / "augmented_v2.csv"
    write_augmented(rep, small_cohort.schema, path)
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    assert header[0] == "id" and header[-1] == "y_next"
    assert "risk_from_v1" in header
    assert len(lines) == len(rep.base.ids) + 1
    first = lines[1].split(",")
    risk_col = header.index("risk_from_v1")
    assert float(first[risk_col]) == rep.risk[0, 0]
