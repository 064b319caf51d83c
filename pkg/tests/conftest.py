import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from riskrec.cohort import Bounds, Cohort, Feature, FeaturePartition, FeatureSchema, VisitDataset
from riskrec.inverse_opt import CostModel
from riskrec.pipeline import ModelConfig, train_all
from riskrec.synth import GeneratorSpec, generate


def tiny_schema():
    return FeatureSchema((
        Feature("age", "continuous"),
        Feature("bp", "continuous"),
        Feature("exercise", "continuous"),
        Feature("smoker", "binary"),
    ))


def tiny_partition(schema):
    return FeaturePartition.from_names(schema, ["age"], ["bp"], ["exercise", "smoker"])


def tiny_cost_model():
    return CostModel(d_indices=(2, 3), c_plus=np.array([3.0, np.inf]),
                     c_minus=np.array([8.0, 5.0]), names=("exercise", "smoker"))


def tiny_bounds():
    return Bounds(d_indices=(2, 3), lower=np.array([-10.0, 0.0]), upper=np.array([20.0, 1.0]))


def make_visit(v, ids, X, y, present):
    return VisitDataset(visit=v, ids=tuple(ids), X=np.asarray(X, dtype=float),
                        y_next=np.asarray(y, dtype=int), present_features=tuple(present))


def tiny_cohort(y1=(0, 0, 0, 1), v2_ids=("a", "b", "c")):
    """Four instances, two visits, feature `bp` missing at v2."""
    schema = tiny_schema()
    ids1 = ("a", "b", "c", "d")
    X1 = np.array([
        [50.0, 120.0, 2.0, 0.0],
        [60.0, 135.0, 1.0, 1.0],
        [55.0, 128.0, 3.0, 0.0],
        [65.0, 150.0, 0.5, 1.0],
    ])
    v1 = make_visit(1, ids1, X1, y1, (0, 1, 2, 3))
    keep = [ids1.index(i) for i in v2_ids]
    X2 = X1[keep][:, [0, 2, 3]] + np.array([0.0, 0.5, 0.0])
    v2 = make_visit(2, v2_ids, X2, [0] * len(v2_ids), (0, 2, 3))
    return Cohort(schema=tiny_schema(), partition=tiny_partition(schema),
                  visits=(v1, v2), cost_model=tiny_cost_model(), bounds=tiny_bounds())


@pytest.fixture(scope="session")
def default_cohort():
    return generate(GeneratorSpec(seed=0))


@pytest.fixture(scope="session")
def default_artifacts(default_cohort):
    return train_all(default_cohort, ModelConfig(), seed=0)


@pytest.fixture(scope="session")
def small_cohort():
    spec = GeneratorSpec(n1=400, seed=3, event_rate=0.06)
    return generate(spec)


@pytest.fixture(scope="session")
def small_artifacts(small_cohort):
    return train_all(small_cohort, ModelConfig(), seed=3)
