import numpy as np
import pytest

from oracles import central_difference
from riskrec.errors import ModelError
from riskrec.indirect import fit_indirect, grad_indirect, predict_indirect
from riskrec.models.serialize import load_model, save_model

rng = np.random.default_rng(7)


def test_constant_targets_predict_constant():
    X = rng.normal(size=(50, 3))
    T = np.full((50, 1), 5.0)
    H = fit_indirect(X, T)
    for _ in range(5):
        q = rng.normal(size=3)
        assert abs(predict_indirect(H, q[:2], q[2:])[0] - 5.0) < 1e-12
        assert np.allclose(grad_indirect(H, q[:2], q[2:]), 0.0, atol=1e-12)


def test_identical_rows_predict_shared_target():
    X = np.tile([1.0, 2.0], (10, 1))
    T = np.tile([3.0, -1.0], (10, 1))
    H = fit_indirect(X, T, bandwidth=0.5)
    assert np.allclose(H.predict([1.0], [2.0]), [3.0, -1.0])


def test_sin_curve_from_dense_sample():
    x = np.linspace(-2, 2, 500)[:, None]
    t = np.sin(x)
    H = fit_indirect(x, t)
    queries = np.linspace(-2, 2, 201)
    errs = [abs(H.predict([], [q])[0] - np.sin(q)) for q in queries]
    assert max(errs) < 0.05


def test_training_input_recovered_at_small_bandwidth():
    X = rng.normal(size=(40, 2))
    T = rng.normal(size=(40, 1))
    H = fit_indirect(X, T, bandwidth=0.01)
    row = 13
    pred = H.predict(X[row, :1], X[row, 1:])
    assert abs(pred[0] - T[row, 0]) < 1e-3


def test_convex_hull_bound():
    X = rng.normal(size=(60, 3))
    T = rng.normal(size=(60, 2))
    H = fit_indirect(X, T)
    for _ in range(25):
        q = rng.normal(scale=2.0, size=3)
        pred = H.predict(q[:1], q[1:])
        for k in range(2):
            assert T[:, k].min() - 1e-9 <= pred[k] <= T[:, k].max() + 1e-9


def test_far_query_returns_target_mean_without_nan():
    X = rng.normal(size=(30, 2))
    T = rng.normal(size=(30, 2))
    H = fit_indirect(X, T, bandwidth=0.3)
    far = np.full(2, 1e6)
    pred = H.predict(far[:1], far[1:])
    assert np.allclose(pred, T.mean(axis=0))
    assert np.allclose(H.jacobian(far[:1], far[1:]), 0.0)


def test_jacobian_matches_finite_differences():
    X = rng.normal(size=(80, 4))
    T = np.column_stack([np.sin(X[:, 0] + X[:, 2]), X[:, 1] * X[:, 3]])
    H = fit_indirect(X, T)
    for _ in range(20):
        q = rng.normal(size=4)
        x_u, x_d = q[:2], q[2:]
        J = grad_indirect(H, x_u, x_d)
        assert J.shape == (2, 2)
        for out in range(2):
            fd = central_difference(lambda d: H.predict(x_u, d)[out], x_d)
            assert np.allclose(J[out], fd, rtol=1e-5, atol=1e-8)


def test_permutation_invariance_over_rows():
    X = rng.normal(size=(40, 3))
    T = rng.normal(size=(40, 2))
    perm = rng.permutation(40)
    H1 = fit_indirect(X, T, bandwidth=0.7)
    H2 = fit_indirect(X[perm], T[perm], bandwidth=0.7)
    q = rng.normal(size=3)
    assert np.allclose(H1.predict(q[:1], q[1:]), H2.predict(q[:1], q[1:]))


def test_errors():
    X = rng.normal(size=(10, 2))
    T = rng.normal(size=(10, 1))
    with pytest.raises(ModelError):
        fit_indirect(X, T, bandwidth=0.0)
    with pytest.raises(ModelError):
        fit_indirect(X[:1], T[:1])
    with pytest.raises(ModelError):
        fit_indirect(X, T[:5])
    H = fit_indirect(X, T)
    with pytest.raises(ModelError):
        H.predict([0.0], [0.0, 0.0])


def test_serialization_round_trip(tmp_path):
    X = rng.normal(size=(25, 3))
    T = rng.normal(size=(25, 2))
    H = fit_indirect(X, T)
    save_model(H, tmp_path / "h.json")
    loaded = load_model(tmp_path / "h.json")
    q = rng.normal(size=3)
    assert np.array_equal(H.predict(q[:1], q[1:]), loaded.predict(q[:1], q[1:]))
