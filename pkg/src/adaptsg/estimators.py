"""Estimator-style wrappers around the adaptive builders.

``fit`` takes the thing to approximate (a :class:`ModelProblem` or a
vectorised callable on the unit cube) instead of a training set, since the
builders choose their own sample points.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .adaptivity import AdaptiveRefinement, CostLedger, FunctionTarget, ModelTarget, get_strategy
from .enhanced import build_base, enhance, eval_enhanced_direct
from .models.base import ModelProblem


def check_unit_cube(X, dim=None):
    """Validate an ``(M, dim)`` array of points in ``[0, 1]**dim``."""
    X = check_array(X, dtype=float, ensure_2d=True)
    if dim is not None and X.shape[1] != dim:
        raise ValueError(f"X has {X.shape[1]} features, expected {dim}")
    if np.any(X < 0.0) or np.any(X > 1.0):
        raise ValueError("points must lie in the unit cube")
    return X


def _target(model, dim, with_adjoint):
    if isinstance(model, ModelProblem):
        return ModelTarget(model, with_adjoint)
    if callable(model):
        if dim is None:
            raise ValueError("dim is required when fitting a plain callable")
        if with_adjoint:
            raise ValueError("a posteriori strategies need a ModelProblem")
        return FunctionTarget(model, dim)
    raise TypeError("expected a ModelProblem or a callable")


class AdaptiveSparseGridRegressor(BaseEstimator, RegressorMixin):
    """Adaptive sparse grid surrogate of a model QoI.

    Parameters
    ----------
    strategy : str
        One of ``dim_surplus``, ``dim_aposteriori``, ``local_traditional``,
        ``local_generalized`` or ``local_generalized_aposteriori``.
    budget : float
        Cost units.
    tol : float
        Stop once the global indicator falls below this value.
    max_level : int
    basis : {"lagrange", "hat"}, optional
    dim : int, optional
        Needed when fitting a plain callable.
    """

    def __init__(self, strategy="dim_surplus", budget=100.0, tol=0.0, max_level=12, basis=None, dim=None):
        self.strategy = strategy
        self.budget = budget
        self.tol = tol
        self.max_level = max_level
        self.basis = basis
        self.dim = dim

    def fit(self, model, y=None):
        strategy = get_strategy(self.strategy)
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        target = _target(model, self.dim, strategy.aposteriori)
        ledger = CostLedger(getattr(model, "cost_ratio", 25.0))
        self.refinement_ = AdaptiveRefinement(target, strategy, self.basis, self.max_level, ledger)
        self.refinement_.run(self.budget, self.tol)
        self.grid_ = self.refinement_.grid
        self.ledger_ = self.refinement_.ledger
        self.stop_reason_ = self.refinement_.stop_reason
        self.n_features_in_ = target.dim
        return self

    def predict(self, X):
        check_is_fitted(self, "grid_")
        return self.grid_(check_unit_cube(X, self.n_features_in_))


class EnhancedSparseGridRegressor(BaseEstimator, RegressorMixin):
    """Two-phase surrogate of the error-corrected QoI.

    Parameters
    ----------
    strategy : str
        First-phase strategy.
    budget : float
        Total cost units of both phases.
    tau_rule : {"max_indicator", "global_indicator"}
    max_level : int
    """

    def __init__(self, strategy="dim_surplus", budget=100.0, tau_rule="max_indicator", max_level=12):
        self.strategy = strategy
        self.budget = budget
        self.tau_rule = tau_rule
        self.max_level = max_level

    def fit(self, model, y=None):
        if not isinstance(model, ModelProblem):
            raise TypeError("the enhanced surrogate needs a ModelProblem")
        self.model_ = model
        base = build_base(model, self.budget, self.strategy, max_level=self.max_level)
        self.result_ = enhance(base, model, self.budget, self.tau_rule)
        self.ledger_ = self.result_.ledger
        self.stop_reason_ = self.result_.stop_reason
        self.n_features_in_ = model.dim
        return self

    def predict(self, X):
        """Evaluate the second-phase surrogate."""
        check_is_fitted(self, "result_")
        return self.result_.predict(check_unit_cube(X, self.n_features_in_))

    def predict_direct(self, X):
        """Corrected QoI through the first-phase fields (one residual per point)."""
        check_is_fitted(self, "result_")
        return eval_enhanced_direct(self.result_.base.grid, self.model_, check_unit_cube(X, self.n_features_in_))
