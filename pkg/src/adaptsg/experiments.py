"""Convergence studies: validation sampling, l2 errors and CSV output.

Three approximants are compared for each refinement strategy:

``J_hn``
    The plain surrogate of the computed QoI.
``J_n_eps``
    The surrogate corrected pointwise by the error estimate of its own
    interpolated forward and adjoint fields (residual cost not charged).
``J_nm_eps``
    A second surrogate built on the corrected QoI (half the budget on solves,
    the rest on residual evaluations).

Errors are measured against direct solves at Latin hypercube samples.
"""

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import qmc

from .adaptivity import AdaptiveRefinement, CostLedger, ModelTarget, get_strategy
from .enhanced import build_base, enhance, eval_enhanced_direct
from .models import DiffusionModel, LotkaVolterraModel

logger = logging.getLogger(__name__)

VARIANTS = ("J_hn", "J_n_eps", "J_nm_eps")
CSV_HEADER = ("variant", "cost", "l2_error")


class EvaluationError(RuntimeError):
    """An evaluator failed or returned a non-finite value at a sample."""

    def __init__(self, message, index):
        super().__init__(message)
        self.index = index


def build_model(block):
    """Instantiate a model from its JSON configuration block."""
    block = dict(block)
    name = block.pop("model", "diffusion")
    cost_ratio = block.pop("cost_ratio_C", 25.0)
    if name == "diffusion":
        return DiffusionModel(
            dim=block.pop("d", 25),
            n_elements=block.pop("N_e", 100),
            corr_length=block.pop("l_c", 0.1),
            sigma=block.pop("sigma_a", 1.0),
            mean=block.pop("mean", 0.0),
            log_field=block.pop("log_field", True),
            cost_ratio=cost_ratio,
        )
    if name == "lotka_volterra":
        d = block.pop("d", 9)
        if d != 9:
            raise ValueError("the Lotka-Volterra model has exactly 9 random variables")
        return LotkaVolterraModel(
            n_steps=block.pop("N_t", 1000),
            horizon=block.pop("T", 10.0),
            z0=block.pop("z0", 0.5),
            alpha_diag=block.pop("alpha_diag", 1.0),
            cost_ratio=cost_ratio,
        )
    raise ValueError(f"unknown model {name!r}")


def lhs_sample(n, dim, seed=None):
    """Latin hypercube sample of ``n`` points in ``[0, 1]**dim``."""
    if n < 1 or dim < 1:
        raise ValueError("need at least one sample and one dimension")
    return qmc.LatinHypercube(d=dim, seed=seed).random(n)


def _checked(evaluator, samples, name):
    try:
        vals = np.asarray(evaluator(samples), dtype=float).reshape(len(samples))
    except Exception as exc:
        for m in range(len(samples)):
            try:
                evaluator(samples[m : m + 1])
            except Exception:
                raise EvaluationError(f"{name} evaluator failed at sample {m}: {exc}", m) from exc
        raise
    bad = np.flatnonzero(~np.isfinite(vals))
    if len(bad):
        raise EvaluationError(f"{name} evaluator returned a non-finite value at sample {bad[0]}", int(bad[0]))
    return vals


def l2_error(candidate, reference, samples):
    """Root mean square difference of two evaluators over ``samples``.

    Either evaluator may also be a precomputed array of values.
    """
    samples = np.atleast_2d(samples)
    c = candidate if isinstance(candidate, np.ndarray) else _checked(candidate, samples, "candidate")
    r = reference if isinstance(reference, np.ndarray) else _checked(reference, samples, "reference")
    return float(np.sqrt(np.mean((c - r) ** 2)))


class ReferenceCache:
    """Direct solves at the validation samples, computed on first request."""

    def __init__(self, model, samples):
        self.model = model
        self.samples = samples
        self._values = None
        self.hits = 0
        self.misses = 0

    def values(self):
        if self._values is None:
            self._values = _checked(self.model.qoi, self.samples, "reference")
            self.misses += len(self.samples)
        else:
            self.hits += len(self.samples)
        return self._values


def fit_rate(costs, errors, last=4):
    """Negative slope of a least-squares line through ``log(error)`` vs ``log(cost)``."""
    costs = np.asarray(costs, dtype=float)[-last:]
    errors = np.asarray(errors, dtype=float)[-last:]
    keep = (costs > 0) & (errors > 0)
    if keep.sum() < 2:
        return math.nan
    slope = np.polyfit(np.log(costs[keep]), np.log(errors[keep]), 1)[0]
    return float(-slope)


@dataclass
class StudyConfig:
    """Settings of one convergence study.

    Attributes
    ----------
    model : dict
        Model block, e.g. ``{"model": "diffusion", "d": 25}``.
    strategies : list of str
    checkpoints : list of float
        Ascending cost budgets.
    n_validation : int
    seed : int
    output : str
        CSV path.
    variants : list of str
    tau_rule : {"max_indicator", "global_indicator"}
    """

    model: dict = field(default_factory=lambda: {"model": "diffusion"})
    strategies: list = field(default_factory=lambda: ["dim_surplus"])
    checkpoints: list = field(default_factory=lambda: [64, 128, 256, 512])
    n_validation: int = 2000
    seed: int = 0
    output: str = "study.csv"
    variants: list = field(default_factory=lambda: list(VARIANTS))
    tau_rule: str = "max_indicator"

    def __post_init__(self):
        self.checkpoints = [float(c) for c in self.checkpoints]
        if any(b <= a for a, b in zip(self.checkpoints, self.checkpoints[1:])):
            raise ValueError("checkpoints must be strictly ascending")
        if not self.checkpoints or self.checkpoints[0] <= 0:
            raise ValueError("checkpoints must be positive")
        if self.n_validation < 1:
            raise ValueError("n_validation must be at least 1")
        self.strategies = [get_strategy(s).name for s in self.strategies]
        unknown = set(self.variants) - set(VARIANTS)
        if unknown:
            raise ValueError(f"unknown variants {sorted(unknown)}")

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if isinstance(data.get("model"), str):
            # a bare model block
            block = {k: data.pop(k) for k in list(data) if k not in cls.__dataclass_fields__ or k == "model"}
            data["model"] = block
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return asdict(self)


@dataclass
class StudyResult:
    rows: list
    rates: dict
    warnings: list
    reference: ReferenceCache

    def series(self, label):
        pts = [(c, e) for v, c, e in self.rows if v == label]
        return [c for c, _ in pts], [e for _, e in pts]


def _label(strategy, variant):
    return f"{strategy}:{variant}"


def run_study(config, model=None):
    """Run every strategy and variant at every checkpoint.

    Surrogates are extended from one checkpoint to the next; the second
    phase of ``J_nm_eps`` is rebuilt from the extended first phase each time.

    Returns
    -------
    StudyResult
        ``rows`` holds ``(variant, cost, l2_error)`` tuples with variant
        labels ``"<strategy>:<approximant>"``.
    """
    model = model if model is not None else build_model(config.model)
    samples = lhs_sample(config.n_validation, model.dim, config.seed)
    ref = ReferenceCache(model, samples)
    rows, warns = [], []

    def warn(msg):
        logger.warning(msg)
        warns.append(msg)

    for name in config.strategies:
        strategy = get_strategy(name)
        if "J_hn" in config.variants:
            label = _label(name, "J_hn")
            reference = ref.values()
            # a posteriori builds need the fields; their cost includes the estimates
            target = ModelTarget(model, with_adjoint=strategy.aposteriori)
            unit = 2 if strategy.aposteriori else 1
            state = AdaptiveRefinement(target, strategy, ledger=CostLedger(model.cost_ratio))
            for c in config.checkpoints:
                if c < unit:
                    warn(f"{label}: checkpoint {c} below the cost of one point, skipped")
                    continue
                state.run(c)
                rows.append((label, state.ledger.total, l2_error(state.grid(samples), reference, samples)))
        if "J_n_eps" in config.variants:
            label = _label(name, "J_n_eps")
            reference = ref.values()
            state = AdaptiveRefinement(ModelTarget(model, True), strategy, ledger=CostLedger(model.cost_ratio))
            for c in config.checkpoints:
                if c < 2:
                    warn(f"{label}: checkpoint {c} below the cost of one point, skipped")
                    continue
                state.run(c)
                vals = eval_enhanced_direct(state.grid, model, samples)
                rows.append((label, state.ledger.total, l2_error(vals, reference, samples)))
        if "J_nm_eps" in config.variants:
            label = _label(name, "J_nm_eps")
            reference = ref.values()
            base = None
            for c in config.checkpoints:
                if c / 2 < 2:
                    warn(f"{label}: checkpoint {c} too small for the first phase, skipped")
                    continue
                base = build_base(model, c, strategy, refinement=base)
                res = enhance(base, model, c, config.tau_rule)
                rows.append((label, res.ledger.total, l2_error(res.predict(samples), reference, samples)))
    rates = {}
    for label in dict.fromkeys(v for v, _, _ in rows):
        costs = [c for v, c, _ in rows if v == label]
        errs = [e for v, _, e in rows if v == label]
        rates[label] = fit_rate(costs, errs)
    return StudyResult(rows, rates, warns, ref)


def write_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for variant, cost, err in rows:
            writer.writerow([variant, repr(float(cost)), repr(float(err))])


def read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [(r["variant"], float(r["cost"]), float(r["l2_error"])) for r in reader]
