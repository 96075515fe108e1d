import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import FunctionTransformer

from hypercontroller.estimator import (
    RecursiveRidgeRegressor,
    RewardWindow,
    RidgeModel,
    RingBuffer,
    batch_ridge,
    invert_spd,
    predict,
    spd_solve,
    ridge_update,
)


def normal_equations(Z, X, lam):
    """Direct closed form G = X Z^T (lam I + Z Z^T)^-1 with Z stored (n, s)."""
    s = Z.shape[1]
    return np.linalg.solve(lam * np.eye(s) + Z.T @ Z, Z.T @ X)


def test_scalar_hand_example():
    model = ridge_update(RidgeModel.fresh(1, 1.0), [2.0], 3.0)
    assert model.V.tolist() == [[5.0]]
    assert model.B.tolist() == [6.0]
    assert model.G.tolist() == pytest.approx([1.2], abs=1e-15)
    assert model.n_updates == 1


def test_ridge_update_is_pure():
    fresh = RidgeModel.fresh(2, 1.0)
    ridge_update(fresh, [1.0, 2.0], 3.0)
    assert fresh.n_updates == 0
    assert np.array_equal(fresh.V, np.eye(2))


@pytest.mark.parametrize("s", [1, 2, 3])
def test_zero_reward_keeps_zero_coefficients(s):
    model = ridge_update(RidgeModel.fresh(s, 1.0), np.arange(1.0, s + 1), 0.0)
    assert np.all(model.B == 0) and np.all(model.G == 0)


def test_predict_examples():
    m = RidgeModel(np.eye(1), np.zeros(1), np.array([1.2]))
    assert predict(m, [2.0]) == pytest.approx(2.4)
    m2 = RidgeModel(np.eye(2), np.zeros(2), np.array([0.5, -1.0]))
    assert predict(m2, [2.0, 1.0]) == 0.0
    assert predict(RidgeModel.fresh(3), [5.0, -1.0, 7.0]) == 0.0


def test_rejects_non_finite():
    model = RidgeModel.fresh(2)
    with pytest.raises(ValueError):
        model.update([np.nan, 1.0], 1.0)
    with pytest.raises(ValueError):
        model.update([1.0, 1.0], np.inf)
    with pytest.raises(ValueError):
        model.predict([1.0, np.inf])
    with pytest.raises(ValueError):
        model.update([1.0], 1.0)


@pytest.mark.parametrize("s", [1, 2, 3])
@pytest.mark.parametrize("lam", [0.1, 1.0, 10.0])
def test_recursive_matches_batch(s, lam):
    rng = np.random.default_rng(s * 100 + int(lam * 10))
    for _ in range(20):
        k = rng.integers(1, 51)
        Z = rng.normal(size=(k, s))
        X = rng.normal(size=k)
        model = RidgeModel.fresh(s, lam)
        for z, x in zip(Z, X):
            model.update(z, x)
        expected = normal_equations(Z, X, lam)
        assert np.linalg.norm(model.G - expected) <= 1e-10 * max(np.linalg.norm(expected), 1e-300)
        np.testing.assert_allclose(batch_ridge(Z, X, lam), expected, rtol=1e-9, atol=1e-12)


def test_long_sequence_matches_batch():
    rng = np.random.default_rng(7)
    for s in (1, 2, 3):
        Z = rng.normal(size=(1000, s))
        X = Z @ rng.normal(size=s) + rng.normal(size=1000)
        model = RidgeModel.fresh(s, 1.0)
        for z, x in zip(Z, X):
            model.update(z, x)
        expected = batch_ridge(Z, X, 1.0)
        assert np.linalg.norm(model.G - expected) <= 1e-10 * np.linalg.norm(expected)


def test_v_eigenvalues_monotone():
    rng = np.random.default_rng(3)
    lam = 0.5
    model = RidgeModel.fresh(3, lam)
    prev = np.linalg.eigvalsh(model.V)
    for _ in range(200):
        model.update(rng.normal(size=3), rng.normal())
        eig = np.linalg.eigvalsh(model.V)
        assert eig.min() >= lam - 1e-12
        assert np.all(eig >= prev - 1e-9)
        prev = eig


def test_updates_commute():
    rng = np.random.default_rng(11)
    data = [(rng.normal(size=2), rng.normal()) for _ in range(6)]
    reference = None
    for perm in itertools.islice(itertools.permutations(range(6)), 0, 720, 37):
        m = RidgeModel.fresh(2, 1.0)
        for k in perm:
            m.update(*data[k])
        if reference is None:
            reference = m
        np.testing.assert_allclose(m.V, reference.V, rtol=1e-14, atol=1e-14)
        np.testing.assert_allclose(m.B, reference.B, rtol=1e-14, atol=1e-14)
        np.testing.assert_allclose(m.G, reference.G, rtol=1e-12, atol=1e-14)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(-10, 10), min_size=3, max_size=3),
    st.lists(st.floats(-10, 10), min_size=3, max_size=3),
    st.lists(st.floats(-10, 10), min_size=3, max_size=3),
    st.floats(-5, 5),
    st.floats(-5, 5),
)
def test_prediction_linearity(g, x, y, alpha, beta):
    m = RidgeModel(np.eye(3), np.zeros(3), np.array(g))
    lhs = m.predict(alpha * np.array(x) + beta * np.array(y))
    rhs = alpha * m.predict(x) + beta * m.predict(y)
    scale = 1 + np.abs(g).sum() * (abs(alpha) * np.abs(x).sum() + abs(beta) * np.abs(y).sum())
    assert abs(lhs - rhs) <= 1e-13 * scale


def test_invert_spd_examples():
    np.testing.assert_array_equal(invert_spd(np.eye(2)), np.eye(2))
    np.testing.assert_allclose(invert_spd([[5.0]]), [[0.2]], rtol=1e-15)
    rng = np.random.default_rng(0)
    M = rng.normal(size=(3, 3))
    V = M @ M.T + 0.1 * np.eye(3)
    assert np.max(np.abs(V @ invert_spd(V) - np.eye(3))) <= 1e-8


def test_invert_spd_ill_conditioned():
    rng = np.random.default_rng(1)
    for s in range(1, 9):
        Qm, _ = np.linalg.qr(rng.normal(size=(s, s)))
        eig = np.logspace(0, 8, s) if s > 1 else np.array([1e8])
        V = (Qm * eig) @ Qm.T
        V = (V + V.T) / 2
        assert np.max(np.abs(V @ invert_spd(V) - np.eye(s))) <= 1e-8


def test_invert_spd_rejects_indefinite():
    with pytest.raises(np.linalg.LinAlgError):
        invert_spd([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(np.linalg.LinAlgError):
        invert_spd([[1.0, 0.5], [0.0, 1.0]])


def test_spd_solve():
    V = np.array([[4.0, 1.0], [1.0, 3.0]])
    np.testing.assert_allclose(spd_solve(V, np.array([1.0, 2.0])), np.linalg.solve(V, [1.0, 2.0]), rtol=1e-14)
    with pytest.raises(np.linalg.LinAlgError):
        spd_solve(np.array([[1.0, 2.0], [2.0, 1.0]]), np.ones(2))


def test_snapshot_roundtrip_of_model():
    m = RidgeModel.fresh(2, 1.0).update([1.0, 2.0], 0.5, t=4)
    back = RidgeModel.from_dict(m.to_dict(), 2)
    assert np.array_equal(back.G, m.G) and back.visits == [4] and back.n_updates == 1
    with pytest.raises(ValueError):
        RidgeModel.from_dict(m.to_dict(), 3)


def test_ring_buffer():
    buf = RingBuffer(2)
    assert not buf.full
    for x in (1.0, 2.0, 3.0):
        buf.append(x)
    assert buf.full and buf.to_list() == [2.0, 3.0]


# scikit-learn surface


def test_regressor_matches_batch_and_partial_fit():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(40, 2))
    y = X @ [1.5, -0.5] + 0.1 * rng.normal(size=40)
    full = RecursiveRidgeRegressor(lam=2.0).fit(X, y)
    np.testing.assert_allclose(full.coef_, batch_ridge(X, y, 2.0), rtol=1e-10)
    inc = RecursiveRidgeRegressor(lam=2.0)
    for chunk in np.array_split(np.arange(40), 4):
        inc.partial_fit(X[chunk], y[chunk])
    np.testing.assert_allclose(inc.coef_, full.coef_, rtol=1e-12)
    np.testing.assert_allclose(full.predict(X), X @ full.coef_)
    assert full.get_params() == {"lam": 2.0}
    assert clone(full).get_params() == {"lam": 2.0}


def test_regressor_validation():
    with pytest.raises(ValueError):
        RecursiveRidgeRegressor(lam=0.0).fit([[1.0]], [1.0])
    reg = RecursiveRidgeRegressor().fit([[1.0, 2.0]], [1.0])
    with pytest.raises(ValueError):
        reg.predict([[1.0]])


def test_reward_window_pipeline():
    series = np.array([1.0, 2.0, 4.0, 8.0, 16.0])
    win = RewardWindow(s=2).fit(series)
    np.testing.assert_array_equal(win.transform(series), [[1, 2], [2, 4], [4, 8]])
    np.testing.assert_array_equal(win.target(series), [4, 8, 16])
    rng = np.random.default_rng(0)
    rewards = np.cumsum(rng.normal(size=200))
    lagged, target = RewardWindow(2).fit(rewards).transform(rewards), RewardWindow(2).target(rewards)
    pipe = make_pipeline(FunctionTransformer(), RecursiveRidgeRegressor(lam=1.0)).fit(lagged, target)
    np.testing.assert_allclose(pipe[-1].coef_, batch_ridge(lagged, target, 1.0), rtol=1e-10)
