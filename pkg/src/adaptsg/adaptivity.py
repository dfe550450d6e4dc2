"""Greedy adaptive construction of sparse grid surrogates.

The refinement loop pops the active subspace (dimension adaptivity) or the
active point (local adaptivity) with the largest indicator, refines it and
scores the new candidates, until the active set is empty, the budget is
spent or the global indicator drops below the tolerance.

Two kinds of indicator are supported:

``surplus``
    Candidates are evaluated with the model as soon as they are proposed and
    scored by ``sum |v| w`` over their points.  Evaluated candidates are part
    of the interpolant.
``aposteriori``
    Candidates are scored by ``sum |eps| w`` where ``eps`` is the adjoint
    weighted residual of the *interpolated* forward and adjoint fields.  The
    model is only run when a candidate is popped.
"""

import heapq
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import grid1d
from .sparse_grid import QOI_ONLY, PayloadSchema, SparseGrid, is_admissible, point_coords, subspace_points


class ModelEvaluationError(RuntimeError):
    """The target failed at one or more grid points."""

    def __init__(self, message, points):
        super().__init__(message)
        self.points = points


class AncestorCompletionError(RuntimeError):
    """The budget ran out while adding missing ancestors."""

    def __init__(self, added):
        super().__init__(f"budget exhausted after adding {len(added)} ancestors")
        self.added = added


@dataclass(frozen=True)
class Strategy:
    name: str
    mode: str  # "dimension" | "local"
    indicator: str  # "surplus" | "aposteriori"
    local_rule: str = None  # "traditional" | "generalized"

    @property
    def aposteriori(self):
        return self.indicator == "aposteriori"


STRATEGIES = {
    "dim_surplus": Strategy("dim_surplus", "dimension", "surplus"),
    "dim_aposteriori": Strategy("dim_aposteriori", "dimension", "aposteriori"),
    "local_traditional": Strategy("local_traditional", "local", "surplus", "traditional"),
    "local_generalized": Strategy("local_generalized", "local", "surplus", "generalized"),
    "local_generalized_aposteriori": Strategy(
        "local_generalized_aposteriori", "local", "aposteriori", "generalized"
    ),
}

_ALIASES = {
    "DimSurplus": "dim_surplus",
    "DimAPosteriori": "dim_aposteriori",
    "LocalTraditional": "local_traditional",
    "LocalGeneralized": "local_generalized",
    "LocalGeneralizedAPosteriori": "local_generalized_aposteriori",
}


def get_strategy(name):
    if isinstance(name, Strategy):
        return name
    key = _ALIASES.get(name, name)
    try:
        return STRATEGIES[key]
    except KeyError:
        raise ValueError(f"unknown strategy {name!r}; expected one of {sorted(STRATEGIES)}") from None


def surplus_counterpart(strategy):
    """The surplus-driven strategy with the same refinement structure."""
    strategy = get_strategy(strategy)
    if not strategy.aposteriori:
        return strategy
    return {"dimension": STRATEGIES["dim_surplus"], "local": STRATEGIES["local_generalized"]}[strategy.mode]


@dataclass
class RefinementConfig:
    strategy: str = "dim_surplus"
    budget: float = 100.0
    tol: float = 0.0
    max_level: int = 12
    basis: str = None

    def __post_init__(self):
        self.strategy = get_strategy(self.strategy).name
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        if self.tol < 0:
            raise ValueError("tolerance must be non-negative")
        if self.basis is None:
            self.basis = "lagrange" if STRATEGIES[self.strategy].mode == "dimension" else "hat"


@dataclass
class CostLedger:
    """Counts solves; one forward or adjoint solve is one unit of cost."""

    cost_ratio: float = 25.0
    forward_solves: int = 0
    adjoint_solves: int = 0
    residual_evals: int = 0

    @property
    def total(self):
        return self.forward_solves + self.adjoint_solves + self.residual_evals / self.cost_ratio

    def copy(self):
        return CostLedger(self.cost_ratio, self.forward_solves, self.adjoint_solves, self.residual_evals)

    def as_dict(self):
        return {
            "cost_ratio": self.cost_ratio,
            "forward_solves": self.forward_solves,
            "adjoint_solves": self.adjoint_solves,
            "residual_evals": self.residual_evals,
            "total": self.total,
        }


class ModelTarget:
    """Evaluate a :class:`~adaptsg.models.base.ModelProblem` at grid points.

    With ``with_adjoint`` the payload carries forward and adjoint
    coefficients (two units per point); otherwise only the QoI (one unit).
    """

    def __init__(self, model, with_adjoint=True):
        self.model = model
        self.dim = model.dim
        self.with_adjoint = with_adjoint
        self.schema = PayloadSchema(model.forward_size, model.adjoint_size) if with_adjoint else QOI_ONLY

    @property
    def can_estimate(self):
        return self.with_adjoint

    @property
    def point_cost(self):
        return 2 if self.with_adjoint else 1

    def evaluate(self, xi, ledger):
        qoi, fwd = self.model.solve_forward(xi)
        ledger.forward_solves += len(xi)
        if not self.with_adjoint:
            return self.schema.join(qoi)
        adj = self.model.solve_adjoint(xi, fwd)
        ledger.adjoint_solves += len(xi)
        return self.schema.join(qoi, fwd, adj)

    def estimate(self, grid, xi, ledger):
        """Error estimates of the current interpolant at ``xi`` (no solves)."""
        if not grid.schema.has_fields:
            raise ValueError("a posteriori estimates need forward and adjoint payloads")
        _, fwd, adj = grid.schema.split(grid.interpolate(xi))
        eps = self.model.error_estimate(fwd, adj, xi)
        ledger.residual_evals += len(xi)
        return eps


class FunctionTarget:
    """Evaluate a plain vectorised callable; each call point costs ``cost`` units."""

    schema = QOI_ONLY
    can_estimate = False

    def __init__(self, func, dim, cost=1):
        self.func = func
        self.dim = int(dim)
        self.cost = cost

    @property
    def point_cost(self):
        return self.cost

    def evaluate(self, xi, ledger):
        vals = np.asarray(self.func(xi), dtype=float).reshape(len(xi), 1)
        ledger.forward_solves += self.cost * len(xi)
        return vals


def surplus_indicator(surpluses, weights):
    """``sum |v| w`` over the points of one refinement target."""
    surpluses = np.asarray(surpluses, dtype=float)
    if np.any(~np.isfinite(surpluses)):
        raise ValueError("surplus unavailable (point not evaluated)")
    return float(np.sum(np.abs(surpluses) * np.asarray(weights, dtype=float)))


def aposteriori_indicator(estimates, weights):
    """``sum |eps| w`` over the candidate points of one refinement target."""
    return float(np.sum(np.abs(np.asarray(estimates, dtype=float)) * np.asarray(weights, dtype=float)))


def global_indicator(gammas):
    return math.fsum(gammas)


def terminate(n_active, cost, tol, budget, eta):
    """Stop when nothing is active, the budget is spent or ``eta < tol``.

    A vanishing global indicator also stops: there is nothing left to gain.
    """
    return n_active == 0 or cost >= budget or eta < tol or eta == 0.0


def point_weights(levels, indices, basis, rule):
    levels = np.atleast_2d(levels)
    indices = np.atleast_2d(indices)
    w = np.ones(len(levels))
    for k in range(levels.shape[1]):
        for l in np.unique(levels[:, k]):
            if l == 0:
                continue
            m = levels[:, k] == l
            w[m] *= grid1d.level_weights(basis, rule, l)[indices[m, k]]
    return w


def refine_dim(accepted, popped, exclude=(), max_level=12):
    """Admissible forward neighbours of ``popped``.

    ``accepted`` must already contain ``popped``.  Indices in ``exclude`` (the
    active set) and indices beyond ``max_level`` in any direction are skipped.
    """
    popped = tuple(popped)
    out = []
    for k in range(len(popped)):
        cand = popped[:k] + (popped[k] + 1,) + popped[k + 1 :]
        if cand[k] > max_level or cand in accepted or cand in exclude:
            continue
        if is_admissible(accepted, cand):
            out.append(cand)
    return out


def local_children(levels, indices, max_level=12):
    """Hierarchical children of a point in every direction (point keys)."""
    levels, indices = tuple(levels), tuple(indices)
    out = []
    for k in range(len(levels)):
        for l, i in grid1d.children(levels[k], indices[k]):
            if l > max_level:
                continue
            out.append((levels[:k] + (l,) + levels[k + 1 :], indices[:k] + (i,) + indices[k + 1 :]))
    return out


def local_parents(levels, indices):
    out = []
    for k in range(len(levels)):
        par = grid1d.parent(levels[k], indices[k])
        if par is not None:
            out.append((levels[:k] + (par[0],) + levels[k + 1 :], indices[:k] + (par[1],) + indices[k + 1 :]))
    return out


def missing_ancestors(grid, key):
    """All hierarchical ancestors of ``key`` absent from ``grid``, sorted by level sum."""
    missing = set()
    stack = local_parents(*key)
    while stack:
        p = stack.pop()
        if p in grid or p in missing:
            continue
        missing.add(p)
        stack.extend(local_parents(*p))
    return sorted(missing, key=lambda p: (sum(p[0]), p))


def _evaluate(target, grid, keys, ledger):
    levels = np.array([k[0] for k in keys], dtype=int).reshape(-1, grid.dim)
    indices = np.array([k[1] for k in keys], dtype=int).reshape(-1, grid.dim)
    xi = point_coords(levels, indices, grid.rule)
    try:
        values = target.evaluate(xi, ledger)
    except Exception as exc:
        raise ModelEvaluationError(f"target evaluation failed at points {keys}: {exc}", keys) from exc
    if not np.all(np.isfinite(values)):
        bad = [keys[j] for j in np.flatnonzero(~np.all(np.isfinite(values), axis=1))]
        raise ModelEvaluationError(f"non-finite target values at points {bad}", bad)
    return grid.add_points(levels, indices, values)


def ensure_ancestors(grid, key, target, ledger, budget=None):
    """Evaluate and insert every missing ancestor of ``key``.

    Ancestors are added coarse to fine so the grid stays ancestor-closed.
    If ``budget`` is given and the ledger reaches it before all are added,
    :class:`AncestorCompletionError` carries the points added so far.
    """
    todo = missing_ancestors(grid, key)
    added = []
    for total, group in itertools.groupby(todo, key=lambda p: sum(p[0])):
        group = [p for p in group if p not in grid]
        if not group:
            continue
        if budget is not None and ledger.total >= budget:
            raise AncestorCompletionError(added)
        _evaluate(target, grid, group, ledger)
        added.extend(group)
    return added


@dataclass
class _Active:
    gamma: float
    evaluated: bool


class AdaptiveRefinement:
    """Resumable state of one adaptive sparse grid construction.

    Parameters
    ----------
    target : ModelTarget or FunctionTarget
    strategy : str or Strategy
    basis : {"lagrange", "hat"}, optional
    max_level : int
        Per-direction level cap.
    ledger : CostLedger, optional
    """

    def __init__(self, target, strategy="dim_surplus", basis=None, max_level=12, ledger=None, trace_file=None):
        self.target = target
        self.strategy = get_strategy(strategy)
        if self.strategy.aposteriori and not target.can_estimate:
            raise ValueError(f"strategy {self.strategy.name} needs a target with forward and adjoint payloads")
        if basis is None:
            basis = "lagrange" if self.strategy.mode == "dimension" else "hat"
        self.max_level = int(max_level)
        self.ledger = ledger if ledger is not None else CostLedger(getattr(getattr(target, "model", None), "cost_ratio", 25.0))
        self.grid = SparseGrid(target.dim, basis, schema=target.schema)
        self.accepted = set()  # refined subspaces (dimension) or refined points (local)
        self.refined_subspaces = set()
        self.active = {}
        self._heap = []
        self._deferred = set()
        self.trace = []
        self.trace_file = trace_file
        self.iteration = 0
        self.stop_reason = None

    # -- bookkeeping -------------------------------------------------------
    @property
    def dim(self):
        return self.grid.dim

    @property
    def eta(self):
        return global_indicator(item.gamma for item in self.active.values())

    def _push(self, key, gamma, evaluated):
        self.active[key] = _Active(float(gamma), evaluated)
        heapq.heappush(self._heap, (-float(gamma), key))

    def _pop(self):
        while self._heap:
            neg, key = heapq.heappop(self._heap)
            item = self.active.get(key)
            if item is not None and item.gamma == -neg:
                del self.active[key]
                return key, item
        raise IndexError("active set is empty")

    def _target_points(self, key):
        """Point keys of a refinement target."""
        if self.strategy.mode == "local":
            return [key]
        indices, _ = subspace_points(key, self.grid.rule)
        return [(key, tuple(int(v) for v in i)) for i in indices]

    def _weights(self, keys):
        levels = np.array([k[0] for k in keys], dtype=int).reshape(-1, self.dim)
        indices = np.array([k[1] for k in keys], dtype=int).reshape(-1, self.dim)
        return point_weights(levels, indices, self.grid.basis, self.grid.rule)

    def _surplus_gamma(self, key):
        pts = self._target_points(key)
        rows = [self.grid.row(p) for p in pts]
        return surplus_indicator(self.grid.surpluses[rows, 0], self._weights(pts))

    # -- construction ------------------------------------------------------
    def initialise(self):
        root = ((0,) * self.dim, (0,) * self.dim)
        _evaluate(self.target, self.grid, [root], self.ledger)
        key = root[0] if self.strategy.mode == "dimension" else root
        self._push(key, self._surplus_gamma(key), True)
        return self

    def terminate(self, budget, tol):
        stop = None
        if not self.active:
            stop = "empty"
        elif self.ledger.total >= budget:
            stop = "budget"
        else:
            eta = self.eta
            # a zero root surplus alone says nothing, so eta == 0 only stops after a refinement
            if eta < tol or (eta == 0.0 and self.iteration > 0):
                stop = "tolerance"
        self.stop_reason = stop
        return stop is not None

    def run(self, budget, tol=0.0, strict=False):
        """Refine until :meth:`terminate` fires; may be called repeatedly.

        With ``strict`` a step whose planned cost would take the ledger past
        ``budget`` is not started and the run stops with reason ``"budget"``.
        """
        if not len(self.grid):
            self.initialise()
        while not self.terminate(budget, tol):
            key, item = self._pop()
            if strict and self.ledger.total + self._step_cost(key, item) > budget:
                self._push(key, item.gamma, item.evaluated)
                self.stop_reason = "budget"
                break
            self._refine(key, item)
        return self

    def step(self):
        """Refine the highest-priority active target once; returns its key."""
        if not len(self.grid):
            self.initialise()
        key, item = self._pop()
        self._refine(key, item)
        return key

    def _refine(self, key, item):
        if not item.evaluated:
            self._accept_unevaluated(key)
        self.accepted.add(key)
        if self.strategy.mode == "dimension":
            self._refine_dimension(key)
        else:
            self._refine_local(key)
        self.iteration += 1
        self._record(key, item.gamma)

    def _record(self, key, gamma):
        line = {
            "iteration": self.iteration,
            "target": [list(k) for k in key] if self.strategy.mode == "local" else list(key),
            "gamma": gamma,
            "eta": self.eta,
            "cost": self.ledger.total,
        }
        self.trace.append(line)
        if self.trace_file is not None:
            self.trace_file.write(json.dumps(line) + "\n")

    def _accept_unevaluated(self, key):
        if self.strategy.mode == "local":
            self._complete_ancestors(key)
        pts = [p for p in self._target_points(key) if p not in self.grid]
        if pts:
            _evaluate(self.target, self.grid, pts, self.ledger)

    def _score(self, keys):
        """Indicators of fresh candidate targets; evaluates them in surplus mode."""
        pts_per = [self._target_points(k) for k in keys]
        flat = [p for pts in pts_per for p in pts]
        if not flat:
            return []
        if self.strategy.aposteriori:
            levels = np.array([p[0] for p in flat], dtype=int).reshape(-1, self.dim)
            indices = np.array([p[1] for p in flat], dtype=int).reshape(-1, self.dim)
            xi = point_coords(levels, indices, self.grid.rule)
            eps = self.target.estimate(self.grid, xi, self.ledger)
            w = self._weights(flat)
            gammas, start = [], 0
            for pts in pts_per:
                stop = start + len(pts)
                gammas.append(aposteriori_indicator(eps[start:stop], w[start:stop]))
                start = stop
            return gammas
        _evaluate(self.target, self.grid, flat, self.ledger)
        return [self._surplus_gamma(k) for k in keys]

    def _refine_dimension(self, key):
        cands = refine_dim(self.accepted, key, self.active, self.max_level)
        for cand, gamma in zip(cands, self._score(cands)):
            self._push(cand, gamma, not self.strategy.aposteriori)

    def _complete_ancestors(self, key):
        added = ensure_ancestors(self.grid, key, self.target, self.ledger)
        for p in added:
            # inserted ancestors may be refined later; they are scored by their surplus
            if p not in self.active and p not in self.accepted:
                self._push(p, self._surplus_gamma(p), True)

    def _plan_local(self, key):
        """Children to score after refining ``key``, plus deferral updates (no mutation)."""
        refined = self.refined_subspaces | {key[0]}
        generalized = self.strategy.local_rule == "generalized"
        cands, deferred = [], []
        for child in local_children(*key, max_level=self.max_level):
            if child in self._deferred:
                continue
            if generalized and not is_admissible(refined, child[0]):
                deferred.append(child)
            else:
                cands.append(child)
        released = []
        if key[0] not in self.refined_subspaces and self._deferred:
            released = sorted(c for c in self._deferred if is_admissible(refined, c[0]))
            cands.extend(released)
        return cands, deferred, released

    def _refine_local(self, key):
        cands, deferred, released = self._plan_local(key)
        self.refined_subspaces.add(key[0])
        self._deferred.update(deferred)
        self._deferred.difference_update(released)
        fresh = []
        for c in dict.fromkeys(cands):
            if c in self.grid or c in self.active or c in self.accepted:
                continue
            self._complete_ancestors(c)
            if c not in self.grid:
                fresh.append(c)
        for cand, gamma in zip(fresh, self._score(fresh)):
            self._push(cand, gamma, not self.strategy.aposteriori)

    def _step_cost(self, key, item):
        """Cost units that refining ``key`` will charge."""
        solve = set()
        if not item.evaluated:
            if self.strategy.mode == "local":
                solve.update(missing_ancestors(self.grid, key))
            solve.update(p for p in self._target_points(key) if p not in self.grid)
        fresh = []
        if self.strategy.mode == "dimension":
            for c in refine_dim(self.accepted | {key}, key, self.active, self.max_level):
                fresh.extend(self._target_points(c))
        else:
            for c in dict.fromkeys(self._plan_local(key)[0]):
                if c in self.grid or c in self.active or c in self.accepted:
                    continue
                solve.update(missing_ancestors(self.grid, c))
                fresh.append(c)
        fresh = [p for p in fresh if p not in solve]
        if self.strategy.aposteriori:
            return len(solve) * self.target.point_cost + len(fresh) / self.ledger.cost_ratio
        return (len(solve) + len(fresh)) * self.target.point_cost

    # -- hand-over ---------------------------------------------------------
    def continue_with(self, target, grid, strategy=None, ledger=None):
        """Start a new refinement on ``grid`` from this one's index sets.

        Active targets whose points are not in ``grid`` are evaluated with the
        new target; every active target is re-scored by its surplus.  The new
        state charges ``ledger`` (default: a copy of this one's ledger).
        """
        strategy = get_strategy(strategy or surplus_counterpart(self.strategy))
        new = AdaptiveRefinement.__new__(AdaptiveRefinement)
        new.target = target
        new.strategy = strategy
        new.max_level = self.max_level
        new.ledger = ledger if ledger is not None else self.ledger.copy()
        new.grid = grid
        new.accepted = set(self.accepted)
        new.refined_subspaces = set(self.refined_subspaces)
        new.active = {}
        new._heap = []
        new._deferred = set(self._deferred)
        new.trace = []
        new.trace_file = self.trace_file
        new.iteration = 0
        new.stop_reason = None
        keys = sorted(self.active)
        missing = [p for k in keys for p in new._target_points(k) if p not in grid]
        if missing:
            _evaluate(target, grid, sorted(set(missing), key=lambda p: (sum(p[0]), p)), new.ledger)
        for k in keys:
            new._push(k, new._surplus_gamma(k), True)
        return new


def interp_adaptive(target, config, refinement=None, trace_file=None):
    """Build (or continue) an adaptive surrogate.

    Parameters
    ----------
    target : ModelTarget or FunctionTarget
    config : RefinementConfig
    refinement : AdaptiveRefinement, optional
        State to resume; a fresh one is created otherwise.

    Returns
    -------
    AdaptiveRefinement
    """
    if refinement is None:
        refinement = AdaptiveRefinement(
            target, config.strategy, config.basis, config.max_level, trace_file=trace_file
        )
    return refinement.run(config.budget, config.tol)
