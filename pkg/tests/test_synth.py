import numpy as np
import pytest

from riskrec.cohort import validate_cohort, write_cohort
from riskrec.errors import ConfigError
from riskrec.synth import GeneratorSpec, build_schema, generate, ground_truth_risk, spec_from_payload


class TestDeterminism:
    def test_same_seed_identical_files(self, tmp_path):
        spec = GeneratorSpec(n1=150, seed=12, event_rate=0.05)
        a, b = tmp_path / "a", tmp_path / "b"
        write_cohort(generate(spec), a)
        write_cohort(generate(spec), b)
        for name in ("cohort.json", "visit1.csv", "visit2.csv", "visit3.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_different_seed_differs(self):
        c1 = generate(GeneratorSpec(n1=100, seed=1, event_rate=0.05))
        c2 = generate(GeneratorSpec(n1=100, seed=2, event_rate=0.05))
        assert not np.array_equal(c1.visit(1).X, c2.visit(1).X)


class TestStructure:
    def test_default_shape(self, default_cohort):
        assert default_cohort.n_visits == 3
        assert len(default_cohort.schema.features) == 24
        assert default_cohort.visit(1).n == 2000
        assert len(default_cohort.visit(1).present_features) == 24
        assert len(default_cohort.visit(2).present_features) == 19
        assert len(default_cohort.visit(3).present_features) == 14

    def test_validation_passes_without_repair(self, default_cohort):
        validate_cohort(default_cohort)

    def test_event_rate_concentration(self, default_cohort):
        for ds in default_cohort.visits:
            target = 0.02 * ds.n
            assert 0.5 * target <= ds.y_next.sum() <= 1.5 * target

    def test_event_rate_within_three_binomial_sd(self, default_cohort):
        ds = default_cohort.visit(1)
        rate = 0.02
        sd = np.sqrt(ds.n * rate * (1 - rate))
        assert abs(ds.y_next.sum() - ds.n * rate) <= 3 * sd

    def test_nested_missingness(self, default_cohort):
        p2 = set(default_cohort.visit(2).present_features)
        p3 = set(default_cohort.visit(3).present_features)
        assert p3 <= p2 <= set(range(24))

    def test_bounds_contain_observed_direct_values(self, default_cohort):
        d_idx = list(default_cohort.cost_model.d_indices)
        for ds in default_cohort.visits:
            col = {j: c for c, j in enumerate(ds.present_features)}
            for k, j in enumerate(d_idx):
                if j not in col:
                    continue
                assert (ds.X[:, col[j]] >= default_cohort.bounds.lower[k]).all()
                assert (ds.X[:, col[j]] <= default_cohort.bounds.upper[k]).all()

    def test_cost_model_sentinels(self, default_cohort):
        cm = default_cohort.cost_model
        finite = np.isfinite(cm.c_plus) | np.isfinite(cm.c_minus)
        assert finite.all()
        assert (~np.isfinite(cm.c_plus)).any() and (~np.isfinite(cm.c_minus)).any()


class TestGroundTruth:
    def test_all_zero_standardized_instance(self):
        spec = GeneratorSpec(n1=50, seed=3, event_rate=0.05)
        from riskrec.synth import _derive_params

        params = _derive_params(spec)
        prob = ground_truth_risk(spec, params.loc)
        expected = 1.0 / (1.0 + np.exp(-params.intercept))
        assert abs(prob - expected) < 1e-12

    def test_output_in_unit_interval(self):
        spec = GeneratorSpec(n1=50, seed=3, event_rate=0.05)
        cohort = generate(spec)
        ds = cohort.visit(1)
        for r in range(0, ds.n, 7):
            assert 0.0 <= ground_truth_risk(spec, ds.X[r]) <= 1.0

    def test_oracle_is_learnable(self, default_cohort, default_artifacts):
        # f1 must rank labels sampled from the oracle well
        from riskrec.models.metrics import auc

        spec = GeneratorSpec(seed=0)
        ds = default_cohort.visit(1)
        probs = np.array([ground_truth_risk(spec, ds.X[r]) for r in range(ds.n)])
        rows = default_artifacts.test_rows(1)
        scores = default_artifacts.classifiers[0].predict_proba(
            default_artifacts.reps[0].matrix[rows])
        r = np.random.default_rng(0)
        labels = (r.random(rows.size) < probs[rows]).astype(int)
        assert auc(scores, labels) > 0.75


class TestSpecValidation:
    def test_zero_event_rate_rejected(self):
        with pytest.raises(ConfigError):
            GeneratorSpec(event_rate=0.0)

    def test_non_nested_schedule_names_feature(self):
        schema, _ = build_schema(GeneratorSpec())
        names = schema.names
        with pytest.raises(ConfigError, match=names[3]):
            generate(GeneratorSpec(missing_schedule=((names[3],), (names[5],))))

    def test_unknown_payload_key_rejected(self):
        with pytest.raises(ConfigError):
            spec_from_payload({"n1": 100, "bogus": 1})

    def test_payload_round_trip(self):
        spec = spec_from_payload({"n1": 120, "seed": 5, "event_rate": 0.05,
                                  "missing_schedule": [["bmi"], ["bmi", "glucose"]]})
        cohort = generate(spec)
        missing2 = set(range(24)) - set(cohort.visit(2).present_features)
        assert {cohort.schema.features[j].name for j in missing2} == {"bmi"}


class TestRandomSpecs:
    def test_many_random_specs_validate(self):
        r = np.random.default_rng(99)
        for trial in range(12):
            spec = GeneratorSpec(
                n1=int(r.integers(80, 300)),
                n_visits=int(r.integers(2, 5)),
                n_indirect=int(r.integers(4, 12)),
                n_direct_continuous=int(r.integers(2, 6)),
                event_rate=float(r.uniform(0.02, 0.2)),
                dropout_rate=float(r.uniform(0.0, 0.05)),
                missing_per_visit=int(r.integers(0, 5)),
                seed=int(r.integers(0, 10**6)),
            )
            cohort = generate(spec)
            validate_cohort(cohort)
