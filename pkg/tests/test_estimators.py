import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from adaptsg import AdaptiveSparseGridRegressor, EnhancedSparseGridRegressor
from adaptsg.models import DiffusionModel, FunctionModel


def f(x):
    return np.exp(-x[:, 0]) * (1 + x[:, 1] ** 2)


def test_fit_callable_and_predict():
    est = AdaptiveSparseGridRegressor(budget=80, dim=2).fit(f)
    X = np.random.default_rng(0).random((50, 2))
    assert np.max(np.abs(est.predict(X) - f(X))) < 1e-4
    assert est.ledger_.forward_solves <= 80 + 20
    assert est.n_features_in_ == 2


def test_score_is_r2():
    est = AdaptiveSparseGridRegressor(budget=80, dim=2).fit(f)
    X = np.random.default_rng(1).random((50, 2))
    assert est.score(X, f(X)) > 0.999


def test_get_params_and_clone():
    est = AdaptiveSparseGridRegressor(strategy="local_generalized", budget=10)
    params = est.get_params()
    assert params["strategy"] == "local_generalized" and params["budget"] == 10
    twin = clone(est)
    assert twin.get_params() == params


def test_callable_needs_dim():
    with pytest.raises(ValueError):
        AdaptiveSparseGridRegressor().fit(f)


def test_aposteriori_needs_model():
    with pytest.raises(ValueError):
        AdaptiveSparseGridRegressor(strategy="dim_aposteriori", dim=2).fit(f)


def test_aposteriori_with_model():
    est = AdaptiveSparseGridRegressor(strategy="dim_aposteriori", budget=60).fit(FunctionModel(f, 2))
    X = np.random.default_rng(2).random((20, 2))
    assert np.max(np.abs(est.predict(X) - f(X))) < 1e-2


def test_bad_inputs():
    with pytest.raises(TypeError):
        AdaptiveSparseGridRegressor().fit(42)
    with pytest.raises(ValueError):
        AdaptiveSparseGridRegressor(budget=0, dim=2).fit(f)
    with pytest.raises(ValueError):
        AdaptiveSparseGridRegressor(strategy="nope", dim=2).fit(f)


def test_predict_validation():
    est = AdaptiveSparseGridRegressor(budget=20, dim=2)
    with pytest.raises(NotFittedError):
        est.predict([[0.5, 0.5]])
    est.fit(f)
    with pytest.raises(ValueError):
        est.predict([[0.5, 0.5, 0.5]])
    with pytest.raises(ValueError):
        est.predict([[1.5, 0.5]])


def test_enhanced_regressor():
    model = DiffusionModel(dim=3, n_elements=20)
    est = EnhancedSparseGridRegressor(budget=100).fit(model)
    X = np.random.default_rng(3).random((30, 3))
    direct = est.predict_direct(X)
    assert np.max(np.abs(est.predict(X) - direct)) < 5e-3
    assert est.ledger_.forward_solves == est.result_.base.ledger.forward_solves
    assert est.stop_reason_ in ("empty", "budget", "tolerance")


def test_enhanced_regressor_needs_model():
    with pytest.raises(TypeError):
        EnhancedSparseGridRegressor().fit(f)
