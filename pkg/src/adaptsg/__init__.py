"""Adaptive sparse grid surrogates enhanced with adjoint-based error estimates."""

from .adaptivity import (
    STRATEGIES,
    AdaptiveRefinement,
    CostLedger,
    FunctionTarget,
    ModelTarget,
    RefinementConfig,
    interp_adaptive,
)
from .enhanced import EnhancedResult, enhanced_interp, eval_enhanced_direct, rebase_with_delta, tau_epsilon
from .estimators import AdaptiveSparseGridRegressor, EnhancedSparseGridRegressor
from .experiments import StudyConfig, l2_error, lhs_sample, run_study
from .sparse_grid import PayloadSchema, SparseGrid, load_grid, save_grid

__version__ = "0.1.0"

__all__ = [
    "STRATEGIES",
    "AdaptiveRefinement",
    "AdaptiveSparseGridRegressor",
    "CostLedger",
    "EnhancedResult",
    "EnhancedSparseGridRegressor",
    "FunctionTarget",
    "ModelTarget",
    "PayloadSchema",
    "RefinementConfig",
    "SparseGrid",
    "StudyConfig",
    "enhanced_interp",
    "eval_enhanced_direct",
    "interp_adaptive",
    "l2_error",
    "lhs_sample",
    "load_grid",
    "rebase_with_delta",
    "run_study",
    "save_grid",
    "tau_epsilon",
]
