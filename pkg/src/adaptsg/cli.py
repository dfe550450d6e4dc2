"""Command line driver (``adaptsg <command>``)."""

import argparse
import csv
import json
import logging
import sys

import numpy as np

from .adaptivity import AdaptiveRefinement, AncestorCompletionError, CostLedger, ModelEvaluationError, ModelTarget
from .enhanced import build_base, enhance, save_enhanced
from .experiments import StudyConfig, build_model, lhs_sample, run_study, write_csv
from .models import ModelError, kle_build
from .sparse_grid import SparseGrid, save_grid

logger = logging.getLogger("adaptsg")


def _load_config(path):
    if path is None:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _model_block(cfg):
    block = cfg.get("model", {"model": "diffusion"})
    if isinstance(block, str):
        # a bare model block at top level
        return cfg
    return block


def _dump(obj, path):
    text = json.dumps(obj, indent=2)
    if path is None:
        print(text)
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def cmd_kle(args, cfg):
    block = _model_block(cfg)
    field = kle_build(block.get("l_c", 0.1), block.get("sigma_a", 1.0), block.get("d", 25), mean=block.get("mean", 0.0))
    _dump(
        {
            "corr_length": field.corr_length,
            "sigma": field.sigma,
            "nodes": field.nodes.tolist(),
            "eigenvalues": field.eigenvalues.tolist(),
            "eigenfunctions": field.eigenfunctions.T.tolist(),
            "trace": float(field.all_eigenvalues.sum()),
        },
        args.out,
    )


def cmd_solve(args, cfg):
    model = build_model(_model_block(cfg))
    if args.xi is None:
        xi = np.full((1, model.dim), 0.5)
    else:
        xi = np.array([[float(v) for v in args.xi.split(",")]])
    qoi, fwd = model.solve_forward(xi)
    adj = model.solve_adjoint(xi, fwd)
    est = model.error_estimate(fwd, adj, xi)
    _dump(
        {
            "xi": xi[0].tolist(),
            "qoi": float(qoi[0]),
            "error_estimate": float(est[0]),
            "forward": fwd[0].tolist(),
            "adjoint": adj[0].tolist(),
        },
        args.out,
    )


def _strategy(args, cfg):
    return args.strategy or cfg.get("strategy", "dim_surplus")


def _budget(args, cfg):
    budget = args.budget if args.budget is not None else cfg.get("budget", 100.0)
    if budget <= 0:
        raise ValueError("budget must be positive")
    return float(budget)


def cmd_build(args, cfg):
    block = _model_block(cfg)
    model = build_model(block)
    trace = open(args.trace, "w") if args.trace else None
    try:
        state = AdaptiveRefinement(
            ModelTarget(model, with_adjoint=True), _strategy(args, cfg), ledger=CostLedger(model.cost_ratio), trace_file=trace
        )
        state.run(_budget(args, cfg), cfg.get("tol", 0.0))
    finally:
        if trace:
            trace.close()
    out = args.out or "surrogate.json"
    save_grid(
        state.grid,
        out,
        model=model.config(),
        strategy=state.strategy.name,
        ledger=state.ledger.as_dict(),
        stop_reason=state.stop_reason,
    )
    logger.info("%d points, cost %.2f, stop: %s", len(state.grid), state.ledger.total, state.stop_reason)


def cmd_enhance(args, cfg):
    model = build_model(_model_block(cfg))
    budget = _budget(args, cfg)
    trace = open(args.trace, "w") if args.trace else None
    try:
        base = build_base(model, budget, _strategy(args, cfg), trace_file=trace)
        result = enhance(base, model, budget, cfg.get("tau_rule", "max_indicator"))
    finally:
        if trace:
            trace.close()
    save_enhanced(result, args.out or "enhanced.json")
    logger.info(
        "base %d points, enhanced %d points, cost %.2f, tau %.3e, stop: %s",
        len(result.base.grid),
        len(result.enhanced.grid),
        result.ledger.total,
        result.tau,
        result.stop_reason,
    )


def cmd_study(args, cfg):
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.strategy:
        cfg["strategies"] = [args.strategy]
    config = StudyConfig.from_dict(cfg)
    result = run_study(config)
    out = args.out or config.output
    write_csv(result.rows, out)
    for label, rate in result.rates.items():
        print(f"{label}: rate {rate:.3f}")
    for msg in result.warnings:
        print(f"warning: {msg}", file=sys.stderr)


def _read_surrogate(path):
    with open(path) as fh:
        data = json.load(fh)
    fmt = data.get("format")
    if fmt == "adaptsg.sparse_grid":
        return SparseGrid.from_dict(data["grid"])
    if fmt == "adaptsg.enhanced":
        return SparseGrid.from_dict(data["enhanced"])
    raise ValueError(f"{path} is not a surrogate file")


def cmd_sample(args, cfg):
    if not args.surrogate:
        raise ValueError("--surrogate is required")
    grid = _read_surrogate(args.surrogate)
    if args.points:
        X = np.loadtxt(args.points, delimiter=",", ndmin=2)
    else:
        X = lhs_sample(args.n, grid.dim, args.seed)
    if X.shape[1] != grid.dim:
        raise ValueError(f"points have {X.shape[1]} columns, surrogate has dimension {grid.dim}")
    values = grid(X)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(fh)
        writer.writerow([f"xi{k + 1}" for k in range(grid.dim)] + ["value"])
        for x, v in zip(X, values):
            writer.writerow([repr(float(c)) for c in x] + [repr(float(v))])
    finally:
        if args.out:
            fh.close()


COMMANDS = {
    "kle": (cmd_kle, "dump KLE eigenpairs"),
    "solve": (cmd_solve, "forward and adjoint solve at one point"),
    "build": (cmd_build, "adaptive surrogate with forward/adjoint payloads"),
    "enhance": (cmd_enhance, "two-phase enhanced surrogate"),
    "study": (cmd_study, "convergence study, CSV output"),
    "sample": (cmd_sample, "evaluate a stored surrogate"),
}


def make_parser():
    parser = argparse.ArgumentParser(prog="adaptsg", description="Adaptive sparse grids with adjoint error estimates.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", help="output path")
        p.add_argument("--strategy", help="refinement strategy")
        p.add_argument("-v", "--verbose", action="store_true")
        if name in ("build", "enhance"):
            p.add_argument("--budget", type=float, default=None, help="cost units")
            p.add_argument("--trace", help="write one JSON line per refinement step")
        if name == "solve":
            p.add_argument("--xi", help="comma separated point in the unit cube (default: centre)")
        if name == "sample":
            p.add_argument("--surrogate", help="file written by build or enhance")
            p.add_argument("--points", help="CSV file of points, one per row")
            p.add_argument("--n", type=int, default=10, help="number of LHS points if --points is not given")
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    func = COMMANDS[args.command][0]
    try:
        cfg = _load_config(args.config)
        func(args, cfg)
    except (ModelError, ModelEvaluationError, AncestorCompletionError, np.linalg.LinAlgError) as exc:
        print(f"adaptsg {args.command}: solver failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TypeError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"adaptsg {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
