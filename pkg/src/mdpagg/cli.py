"""Command-line front end.

Exit codes: 0 success, 2 usage or configuration error, 3 solver or
simulation failure, 4 file-system failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .aggregation import aggregate_model, build_partition, modified_stationary, unaggregate_policy
from .estimation import ZERO_ROW_POLICIES, SimulationError, read_counts_csv, simulate_trajectories, write_counts_csv
from .experiment import (
    ExperimentConfig,
    Truth,
    best_threshold_policy,
    estimated_model,
    metadata,
    results_frame,
    run_experiment,
    summarize,
)
from .groundtruth import DESIGNS, ChainParams, build_model
from .mdp import INTERVENE, WAIT, ConvergenceError, evaluate_policy, solve_optimal
from .plotting import FIGURES, render
from .structure import gray_area, is_threshold

EXIT_USAGE = 2
EXIT_SOLVER = 3
EXIT_IO = 4


class UsageError(Exception):
    pass


def _seed(args, default):
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("MDPAGG_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"MDPAGG_SEED must be an integer, got {env!r}") from None
    return default


def _load_config(args):
    """Experiment config from ``--config`` and command-line overrides."""
    data = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"malformed config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")
    try:
        chain = data.pop("chain", None) or {}
        if not isinstance(chain, dict):
            raise UsageError("config field 'chain' must be an object")
        if "K" in data:
            K = data.pop("K")
            if getattr(args, "K", None) is None:
                args.K = K
        params = ChainParams.design(getattr(args, "design", None) or "1", **chain)
        if getattr(args, "terminal_reward", None) is not None:
            params = ChainParams.from_dict({**params.to_dict(), "terminal_reward": args.terminal_reward})
        config = ExperimentConfig.from_dict({**data, "chain": params})
        overrides = {}
        if getattr(args, "M", None):
            overrides["M_list"] = tuple(args.M)
        if getattr(args, "K_list", None):
            overrides["K_list"] = tuple(args.K_list)
        if getattr(args, "R", None) is not None:
            overrides["R"] = args.R
        if getattr(args, "threshold_assumption", False):
            overrides["threshold_assumption"] = True
        if getattr(args, "zero_row", None):
            overrides["zero_row_policy"] = args.zero_row
        overrides["seed"] = _seed(args, config.seed)
        return ExperimentConfig.from_dict({**config.to_dict(), **overrides, "chain": params})
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _atomic_write(path, writer):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(frame, path):
    _atomic_write(path, lambda tmp: frame.to_csv(tmp, index=False, float_format="%.12g"))


def _write_json(obj, path):
    def writer(tmp):
        with open(tmp, "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
            fh.write("\n")

    _atomic_write(path, writer)


def _out_dir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    return out


def describe_policy(policy):
    """One-line structural description of a full-length stopping policy."""
    inner = np.asarray(policy)[1:-1]
    if not ((inner == WAIT).any() and (inner == INTERVENE).any()):
        return f"threshold policy, T = {is_threshold(policy)}"
    report = gray_area(policy)
    if report.threshold is not None:
        return f"threshold policy, T = {report.threshold}"
    return (
        f"gray-area policy, lambda1 = {report.lambda1}, lambda0 = {report.lambda0}, "
        f"gray states = {list(report.gray_states)}"
    )


def cmd_solve(args):
    config = _load_config(args)
    params = config.chain
    model = build_model(params)
    partition = None
    if args.K is not None:
        if not 1 <= args.K <= params.J:
            raise UsageError(f"--K must satisfy 1 <= K <= J={params.J}, got {args.K}")
        if args.K != params.J:
            partition = build_partition(params.J, args.K)
            model = aggregate_model(model, partition, modified_stationary(model.transitions[WAIT]))
    if args.threshold_assumption:
        policy = best_threshold_policy(model)
        values = evaluate_policy(model, policy)
    else:
        policy, values = solve_optimal(model, method=args.method)
    full = unaggregate_policy(policy, partition) if partition is not None else policy
    start = model.n_states - 2
    print(f"states: {model.n_states} (K = {start}), alpha = {params.alpha}")
    print("policy: " + "".join(str(int(a)) for a in policy))
    print(describe_policy(full))
    waits = np.flatnonzero(full[1:-1] == WAIT)
    if waits.size:
        print(f"first wait state: {int(waits[0]) + 1}")
    print(f"value at start state: {values[start]:.6f} months")
    return 0


def cmd_simulate(args):
    config = _load_config(args)
    M = args.M[0] if args.M else 100
    truth = build_model(config.chain)
    _, counts = simulate_trajectories(truth.transitions[WAIT], M, config.seed, key=(M, args.replication))
    out = _out_dir(args.out)
    _atomic_write(out / "counts.csv", lambda tmp: write_counts_csv(tmp, counts))
    print(f"simulated {M} trajectories, {int(counts.sum())} transitions -> {out / 'counts.csv'}")
    return 0


def cmd_estimate(args):
    config = _load_config(args)
    params = config.chain
    try:
        counts = read_counts_csv(args.counts, n_states=params.J + 2)
    except FileNotFoundError as exc:
        raise OSError(f"cannot read counts file: {exc}") from exc
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    K = args.K if args.K is not None else params.J
    if not 1 <= K <= params.J:
        raise UsageError(f"--K must satisfy 1 <= K <= J={params.J}, got {K}")
    truth = Truth.from_params(params)
    model, partition = estimated_model(counts, K, truth.model.rewards, params.alpha, config.zero_row_policy)
    if config.threshold_assumption:
        policy = best_threshold_policy(model)
    else:
        policy, _ = solve_optimal(model)
    full = unaggregate_policy(policy, partition)
    regret = truth.values[params.J] - evaluate_policy(truth.model, full)[params.J]
    print(f"estimated K = {K} model from {int(counts.sum())} transitions")
    print(describe_policy(full))
    print(f"expected regret: {regret:.6f} months ({1000 * regret:.1f} per thousand)")
    if args.out:
        out = _out_dir(args.out)
        _atomic_write(out / "tpm.csv", lambda tmp: np.savetxt(tmp, model.transitions[WAIT], delimiter=",", fmt="%.17g"))
    return 0


def cmd_experiment(args):
    config = _load_config(args)
    out = _out_dir(args.out)
    results = run_experiment(config, jobs=args.jobs)
    tables = summarize(results)
    truth = Truth.from_params(config.chain)
    meta = metadata(config, args.jobs)
    meta["true_threshold"] = is_threshold(truth.policy)
    meta["true_value_at_start"] = float(truth.values[config.chain.J])
    regret = tables["regret"].assign(zero_row_policy=config.zero_row_policy)
    _write_csv(results_frame(results), out / "results.csv")
    _write_csv(regret, out / "summary.csv")
    _write_csv(tables["frequency"], out / "summary_frequency.csv")
    _write_csv(tables["thresholds"], out / "summary_thresholds.csv")
    _write_csv(tables["lifetime"], out / "summary_lifetime.csv")
    _write_json(meta, out / "meta.json")
    print(f"{len(results)} replications written to {out}")
    return 0


def cmd_report(args):
    import pandas as pd

    path = Path(args.results) / "summary.csv"
    try:
        table = pd.read_csv(path)
    except FileNotFoundError as exc:
        raise OSError(f"no summary at {path}") from exc
    cols = ["threshold_assumed", "M", "K", "n", "mean_per_thousand", "median", "q95", "threshold_rate"]
    print(table[cols].to_string(index=False, float_format=lambda x: f"{x:.3f}"))
    return 0


def cmd_plot(args):
    paths = render(args.results, args.figure, args.out)
    for p in paths:
        print(p)
    return 0


def _add_model_flags(p):
    p.add_argument("--config", metavar="PATH", help="experiment JSON config")
    p.add_argument("--design", choices=DESIGNS, help="named ground-truth parameter set")
    p.add_argument("--terminal-reward", type=float, help="intervention reward at state J")
    p.add_argument("--seed", type=int, help="master seed (falls back to MDPAGG_SEED)")
    p.add_argument("--zero-row", choices=ZERO_ROW_POLICIES, help="fill for unobserved rows")
    p.add_argument("--threshold-assumption", action="store_true",
                   help="restrict to intervene-below threshold policies")


def build_parser():
    parser = argparse.ArgumentParser(prog="mdpagg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mdpagg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve the ground truth or an aggregation of it")
    _add_model_flags(p)
    p.add_argument("--K", type=int, help="aggregate to K interior states first")
    p.add_argument("--method", choices=("policy-iteration", "value-iteration"),
                   default="policy-iteration")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="simulate trajectories and write counts.csv")
    _add_model_flags(p)
    p.add_argument("--M", type=int, nargs=1, help="number of trajectories")
    p.add_argument("--replication", type=int, default=0, help="replication index for the seed stream")
    p.add_argument("--out", required=True, metavar="DIR")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate and solve a model from a counts CSV")
    _add_model_flags(p)
    p.add_argument("--counts", required=True, metavar="PATH")
    p.add_argument("--K", type=int)
    p.add_argument("--out", metavar="DIR", help="also write the estimated wait matrix")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("experiment", help="run the replication grid")
    _add_model_flags(p)
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--M", type=int, nargs="+", help="trajectory counts (overrides config)")
    p.add_argument("--K", dest="K_list", type=int, nargs="+", help="aggregation levels")
    p.add_argument("--R", type=int, help="replications per cell")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="print the regret summary of an experiment")
    p.add_argument("results", metavar="DIR")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("plot", help="render summary tables as SVG")
    p.add_argument("results", metavar="DIR")
    p.add_argument("--figure", required=True, help=f"one of: {', '.join(FIGURES)}")
    p.add_argument("--out", metavar="DIR", help="default: DIR/figures")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "plot" and args.figure not in FIGURES:
        print(f"mdpagg: unknown figure {args.figure!r}; valid: {', '.join(FIGURES)}", file=sys.stderr)
        return EXIT_USAGE
    if getattr(args, "jobs", 1) < 1:
        print("mdpagg: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mdpagg: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, SimulationError, np.linalg.LinAlgError) as exc:
        print(f"mdpagg: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"mdpagg: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
