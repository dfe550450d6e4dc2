"""Surrogates of the error-corrected quantity of interest.

A base surrogate that interpolates the QoI together with the forward and
adjoint solutions lets us evaluate ``J_n + eps`` anywhere at the price of a
residual evaluation.  :func:`enhanced_interp` spends half the budget on such
a base surrogate and the other half on a QoI-only surrogate of the corrected
quantity, stopping once its indicator falls below the larger of the
deterministic error and the squared largest indicator of the base build.
"""

import json
from dataclasses import dataclass

import numpy as np

from .adaptivity import AdaptiveRefinement, CostLedger, ModelTarget, get_strategy, surplus_counterpart
from .sparse_grid import QOI_ONLY, SparseGrid


def _require_fields(grid):
    if not grid.schema.has_fields:
        raise ValueError("the base surrogate carries no forward/adjoint payloads")


def eval_enhanced_direct(base, model, xi, ledger=None):
    """``J_n(xi) + eps(xi)`` from the interpolated forward and adjoint fields.

    Charges one residual evaluation per point to ``ledger`` if given.
    """
    _require_fields(base)
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    qoi, fwd, adj = base.schema.split(base.interpolate(xi))
    eps = model.error_estimate(fwd, adj, xi)
    if ledger is not None:
        ledger.residual_evals += len(xi)
    return qoi + eps


def deterministic_estimates(base, model, ledger=None):
    """Error estimates ``delta`` at the base grid points from the stored solves."""
    _require_fields(base)
    _, fwd, adj = base.schema.split(base.values)
    delta = model.error_estimate(fwd, adj, base.coords)
    if ledger is not None:
        ledger.residual_evals += len(base)
    return delta


def rebase_with_delta(base, model, ledger=None):
    """QoI-only surrogate on the base points with values ``J_h + delta``.

    Parameters
    ----------
    base : SparseGrid or AdaptiveRefinement
        A finished refinement (or its grid) with forward/adjoint payloads.

    Returns
    -------
    grid : SparseGrid
        All surpluses are recomputed from the corrected values.
    delta : ndarray
        Estimates at the grid points, in grid row order.
    """
    if isinstance(base, AdaptiveRefinement):
        if base.stop_reason is None:
            raise ValueError("the base refinement has not finished")
        base = base.grid
    delta = deterministic_estimates(base, model, ledger)
    values = base.values[:, 0] + delta
    return base.with_values(values[:, None], QOI_ONLY), delta


def tau_epsilon(delta_max, gamma_max, rule="max_indicator", eta=None):
    """Balancing tolerance for the second phase.

    ``rule="max_indicator"`` gives ``max(delta_max, gamma_max**2)``;
    ``"global_indicator"`` squares the global indicator ``eta`` instead of
    the largest single one.
    """
    if delta_max < 0 or gamma_max < 0:
        raise ValueError("delta_max and gamma_max must be non-negative")
    if rule == "max_indicator":
        return max(delta_max, gamma_max**2)
    if rule == "global_indicator":
        if eta is None:
            raise ValueError("the 'global_indicator' rule needs eta")
        return max(delta_max, eta**2)
    raise ValueError(f"unknown tau rule {rule!r}")


class EnhancedTarget:
    """Evaluate ``J_n + eps`` through a base surrogate; no model solves."""

    schema = QOI_ONLY
    can_estimate = False

    def __init__(self, base, model):
        _require_fields(base)
        self.base = base
        self.model = model
        self.dim = base.dim

    @property
    def point_cost(self):
        return 1.0 / self.model.cost_ratio

    def evaluate(self, xi, ledger):
        return eval_enhanced_direct(self.base, self.model, xi, ledger)[:, None]


@dataclass
class EnhancedResult:
    """Outcome of :func:`enhanced_interp`.

    Attributes
    ----------
    base : AdaptiveRefinement
        First-phase refinement with QoI, forward and adjoint payloads.
    enhanced : AdaptiveRefinement
        Second-phase refinement of the corrected QoI.
    delta : ndarray
        Estimates at the base grid points.
    delta_max, gamma_max, tau : float
    ledger : CostLedger
        Cost of both phases.
    """

    base: AdaptiveRefinement
    enhanced: AdaptiveRefinement
    delta: np.ndarray
    delta_max: float
    gamma_max: float
    tau: float

    @property
    def ledger(self):
        return self.enhanced.ledger

    @property
    def stop_reason(self):
        return self.enhanced.stop_reason

    def predict(self, xi):
        return self.enhanced.grid(xi)

    def to_dict(self):
        return {
            "format": "adaptsg.enhanced",
            "version": 1,
            "base": self.base.grid.to_dict(),
            "enhanced": self.enhanced.grid.to_dict(),
            "delta_max": self.delta_max,
            "gamma_max": self.gamma_max,
            "tau": self.tau,
            "base_ledger": self.base.ledger.as_dict(),
            "ledger": self.ledger.as_dict(),
            "base_stop_reason": self.base.stop_reason,
            "stop_reason": self.stop_reason,
        }


def save_enhanced(result, path):
    with open(path, "w") as fh:
        json.dump(result.to_dict(), fh)


def load_enhanced(path):
    """Read a file written by :func:`save_enhanced`.

    Returns ``(base, enhanced, info)`` where the first two are grids and
    ``info`` holds the remaining entries.
    """
    with open(path) as fh:
        data = json.load(fh)
    if data.get("format") != "adaptsg.enhanced":
        raise ValueError(f"{path} is not an enhanced surrogate file")
    base = SparseGrid.from_dict(data.pop("base"))
    enhanced = SparseGrid.from_dict(data.pop("enhanced"))
    return base, enhanced, data


def build_base(model, budget, strategy="dim_surplus", tol=0.0, max_level=12, basis=None, refinement=None, trace_file=None):
    """First phase: joint QoI/forward/adjoint surrogate on ``budget / 2`` units."""
    if budget / 2 < 2:
        raise ValueError(f"budget {budget} is too small for a single forward and adjoint solve in the first phase")
    if refinement is None:
        refinement = AdaptiveRefinement(
            ModelTarget(model, with_adjoint=True),
            strategy,
            basis=basis,
            max_level=max_level,
            ledger=CostLedger(model.cost_ratio),
            trace_file=trace_file,
        )
    return refinement.run(budget / 2, tol)


def enhance(base, model, budget, tau_rule="max_indicator", strategy=None, phase2_budget=None):
    """Second phase, starting from a finished first-phase refinement.

    ``budget`` is the total budget ``n``; unless ``phase2_budget`` is given
    the second phase may spend ``n / 2`` units on residual evaluations
    (including the estimates at the base points), on top of what the first
    phase used.  It stops before any step that would exceed that allowance.
    """
    ledger = base.ledger.copy()
    start = ledger.total
    gammas = [item.gamma for item in base.active.values()]
    gamma_max = max(gammas, default=0.0)
    rebased, delta = rebase_with_delta(base, model, ledger)
    delta_max = float(np.max(np.abs(delta)))
    tau = tau_epsilon(delta_max, gamma_max, tau_rule, eta=base.eta)
    strategy = get_strategy(strategy) if strategy is not None else surplus_counterpart(base.strategy)
    phase2 = base.continue_with(EnhancedTarget(base.grid, model), rebased, strategy, ledger=ledger)
    # the second phase never starts a step it cannot pay for
    phase2.run(start + (budget / 2 if phase2_budget is None else phase2_budget), tau, strict=True)
    return EnhancedResult(base, phase2, delta, delta_max, gamma_max, tau)


def enhanced_interp(model, budget, strategy="dim_surplus", tau_rule="max_indicator", tol=0.0, max_level=12, basis=None, trace_file=None):
    """Build an enhanced surrogate with total cost budget ``budget``.

    Parameters
    ----------
    model : ModelProblem
    budget : float
        Total cost units.  Half goes to forward and adjoint solves, the other
        half to residual evaluations (``1 / model.cost_ratio`` units each).
    strategy : str
        First-phase refinement strategy.  The second phase uses the surplus
        driven strategy with the same structure.
    tau_rule : {"max_indicator", "global_indicator"}
    tol : float
        First-phase tolerance.

    Returns
    -------
    EnhancedResult
    """
    base = build_base(model, budget, strategy, tol, max_level, basis, trace_file=trace_file)
    return enhance(base, model, budget, tau_rule)
