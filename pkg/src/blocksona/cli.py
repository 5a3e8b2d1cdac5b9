"""Experiment orchestration and the command-line entry point.

Subcommands: ``run`` (one experiment to a trace file), ``sweep`` (one run
per block count plus a summary table), ``consensus-demo`` (pure block
consensus with a decay fit), and ``validate`` (structural checks of a
config, nonzero exit on violation).  Set ``BLOCKSONA_LOG=debug|info`` for
progress output.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .block_consensus import (
    BlockLayout,
    BlockSchedule,
    next_block,
    run_block_consensus,
)
from .config import (
    ConfigError,
    data_seed,
    graph_seed,
    load_config,
    schedule_seed,
    serialize_config,
)
from .core import StepSchedule, run
from .metrics import (
    completion_time,
    make_stationarity_merit,
    write_summary,
    write_trace,
)
from .regression import RegressionProblem, generate_instance
from .surrogates import Box
from .topology import (
    algebraic_connectivity,
    build_column_stochastic,
    generate_connected_erdos_renyi,
    is_strongly_connected,
)

log = logging.getLogger("blocksona")


def _configure_logging():
    level = os.environ.get("BLOCKSONA_LOG", "warning").strip().lower()
    numeric = {"debug": logging.DEBUG, "info": logging.INFO,
               "warning": logging.WARNING, "error": logging.ERROR}
    logging.basicConfig(
        level=numeric.get(level, logging.WARNING),
        format="%(name)s %(levelname)s %(message)s",
    )


def build_experiment(config):
    """Instance, graph, schedule and bound problem for a validated config."""
    config.require_valid()
    instance = generate_instance(
        config.n_agents, config.dim, config.rows_per_agent, config.sparsity,
        config.noise_var, data_seed(config), lam=config.lam, theta=config.theta,
        box=Box(config.box_lo, config.box_hi),
    )
    graph = generate_connected_erdos_renyi(
        config.n_agents, config.graph_p, graph_seed(config)
    )
    layout = BlockLayout.for_dim(config.dim, config.blocks)
    schedule = BlockSchedule(rule=config.schedule, num_blocks=config.blocks,
                             seed=schedule_seed(config))
    tau = {"pl": config.tau_pl, "l": config.tau_l, "prox_linear": None}[config.surrogate]
    problem = RegressionProblem(instance, layout, kind=config.surrogate, tau=tau)
    steps = StepSchedule(gamma0=config.gamma0, mu=config.mu)
    return instance, graph, schedule, problem, steps


def run_experiment(config, out_dir=None):
    """Run one experiment; write ``trace.csv`` and ``meta.txt``.

    Returns ``(log, meta)`` where ``meta`` echoes the config, the graph
    summary and the outcome.  Deterministic: the same config produces a
    byte-identical trace.
    """
    instance, graph, schedule, problem, steps = build_experiment(config)
    merit = make_stationarity_merit(instance)
    log.info("running %s surrogate, B=%d, max_iters=%d",
             config.surrogate, config.blocks, config.max_iters)
    trace = run(problem, graph, schedule, steps, max_iters=config.max_iters,
                tol=config.tol, d_tol=config.tol, merit=merit)
    t_end = completion_time(trace, config.tol)

    meta = _metadata(config, graph, trace, t_end)
    out = Path(out_dir if out_dir is not None else config.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trace(trace, out / "trace.csv")
    (out / "meta.txt").write_text(meta)
    log.info("finished: t_end=%s rows=%d", t_end, len(trace))
    return trace, meta


def sweep_blocks(config, blocks, out_dir=None):
    """One run per block count, sharing the data instance and graph.

    The iteration cap scales with the block count so every run gets the
    same per-block budget as the base config.  Writes ``trace_B{b}.csv``
    per entry plus ``summary.csv`` with ``B,t_end,t_end_norm,reals_tx``.
    """
    config.require_valid()
    per_block_budget = math.ceil(config.max_iters / config.blocks)
    out = Path(out_dir if out_dir is not None else config.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for b in blocks:
        cfg_b = replace(config, blocks=b, max_iters=per_block_budget * b)
        cfg_b.require_valid()
        instance, graph, schedule, problem, steps = build_experiment(cfg_b)
        merit = make_stationarity_merit(instance)
        log.info("sweep B=%d (cap %d)", b, cfg_b.max_iters)
        trace = run(problem, graph, schedule, steps, max_iters=cfg_b.max_iters,
                    tol=cfg_b.tol, d_tol=cfg_b.tol, merit=merit)
        t_end = completion_time(trace, cfg_b.tol)
        reals = trace.reals_tx[t_end] if t_end is not None else trace.reals_tx[-1]
        rows.append((b, t_end, reals))
        write_trace(trace, out / f"trace_B{b}.csv")
    write_summary(rows, out / "summary.csv")
    (out / "meta.txt").write_text(_sweep_metadata(config, blocks, rows))
    return rows


@dataclass(frozen=True)
class ConsensusDemoResult:
    errors: np.ndarray
    limit: np.ndarray
    rho: float
    c: float
    iterations: int


def consensus_demo(n, num_blocks, schedule_rule="shifted_round_robin", seed=7,
                   tol=1e-10, block_dim=1, p=0.5, graph=None, x0=None,
                   max_iters=100_000):
    """Pure block consensus from a random start; fits the error decay."""
    layout = BlockLayout(num_blocks=num_blocks, block_dim=block_dim)
    if graph is None:
        graph = generate_connected_erdos_renyi(n, p, derive_seed_for_demo(seed))
    base = build_column_stochastic(graph)
    schedule = BlockSchedule(rule=schedule_rule, num_blocks=num_blocks, seed=seed)
    if x0 is None:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
        x0 = rng.standard_normal((n, layout.total_dim))
    x, phi, errors = run_block_consensus(
        graph, base, schedule, layout, x0, max_iters=max_iters, tol=tol
    )
    limit = np.ones(n) @ np.asarray(x0, dtype=float) / n
    c, rho = _fit_decay(errors)
    return ConsensusDemoResult(errors=errors, limit=limit, rho=rho, c=c,
                               iterations=len(errors) - 1)


def derive_seed_for_demo(seed):
    return int(np.random.SeedSequence([seed, 11]).generate_state(1)[0])


def _fit_decay(errors, floor=1e-13):
    usable = np.nonzero(errors > floor)[0]
    if len(usable) < 2:
        return 0.0, 0.0
    t = usable.astype(float)
    logs = np.log(errors[usable])
    slope, intercept = np.polyfit(t, logs, 1)
    return float(np.exp(intercept)), float(np.exp(slope))


def validate_config(config):
    """Config invariants plus structural network/schedule assumptions.

    Returns a list of human-readable violations (empty when everything
    holds): value ranges, strong connectivity of the generated graph,
    column stochasticity of the base weights, and block coverage of the
    schedule within its stated period for every agent.
    """
    problems = config.validate()
    if problems:
        return problems

    graph = generate_connected_erdos_renyi(
        config.n_agents, config.graph_p, graph_seed(config)
    )
    if not is_strongly_connected(graph):
        problems.append("generated graph is not strongly connected")
    base = build_column_stochastic(graph)
    col_err = float(np.max(np.abs(base.matrix.sum(axis=0) - 1.0)))
    if col_err > 1e-12:
        problems.append(f"base weights are not column stochastic (err {col_err:.2e})")
    if np.any((base.matrix > 0) & (base.matrix < base.min_positive_weight - 1e-15)):
        problems.append("a positive weight fell below the declared minimum")

    schedule = BlockSchedule(rule=config.schedule, num_blocks=config.blocks,
                             seed=schedule_seed(config))
    window = schedule.period
    for agent in range(config.n_agents):
        for start in range(2 * window):
            seen = {next_block(schedule, agent, start + s) for s in range(window)}
            if seen != set(range(config.blocks)):
                problems.append(
                    f"schedule misses blocks for agent {agent} in window "
                    f"[{start}, {start + window})"
                )
                break
    return problems


def _metadata(config, graph, trace, t_end):
    lines = ["[config]"]
    lines += serialize_config(config).rstrip("\n").splitlines()
    lines += _graph_lines(config, graph)
    lines += [
        "[result]",
        f"iterations = {trace.t[-1]}",
        f"t_end = {t_end if t_end is not None else 'none'}",
        f"J_final = {trace.j[-1]:.17g}",
        f"D_final = {trace.d[-1]:.17g}",
        f"reals_tx = {trace.reals_tx[-1]}",
    ]
    return "\n".join(lines) + "\n"


def _sweep_metadata(config, blocks, rows):
    lines = ["[config]"]
    lines += serialize_config(config).rstrip("\n").splitlines()
    lines += [
        "[sweep]",
        f"blocks = {','.join(str(b) for b in blocks)}",
    ]
    for b, t_end, reals in rows:
        lines.append(
            f"B{b}: t_end = {t_end if t_end is not None else 'none'}, "
            f"reals_tx = {reals}"
        )
    return "\n".join(lines) + "\n"


def _graph_lines(config, graph):
    conn = algebraic_connectivity(graph) if graph.is_symmetric() else float("nan")
    return [
        "[graph]",
        f"nodes = {graph.n}",
        f"directed_edges = {graph.num_directed_edges}",
        f"algebraic_connectivity = {conn:.17g}",
        f"graph_seed = {graph_seed(config)}",
        f"data_seed = {data_seed(config)}",
        f"schedule_seed = {schedule_seed(config)}",
    ]


def _parse_blocks(text):
    try:
        blocks = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--blocks expects comma-separated integers, got {text!r}")
    if not blocks:
        raise ConfigError("--blocks is empty")
    return blocks


def main(argv=None):
    _configure_logging()
    parser = argparse.ArgumentParser(
        prog="blocksona",
        description="Block-iterative distributed optimization simulator.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None)

    p_sweep = sub.add_parser("sweep", help="run one experiment per block count")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--blocks", required=True,
                         help="comma-separated block counts, e.g. 1,4,16")
    p_sweep.add_argument("--out", default=None)

    p_demo = sub.add_parser("consensus-demo", help="pure block consensus decay")
    p_demo.add_argument("--n", type=int, default=10)
    p_demo.add_argument("--blocks", type=int, default=4)
    p_demo.add_argument("--seed", type=int, default=7)
    p_demo.add_argument("--schedule", default="shifted_round_robin")
    p_demo.add_argument("--tol", type=float, default=1e-10)
    p_demo.add_argument("--p", type=float, default=0.5)
    p_demo.add_argument("--out", default=None,
                        help="write the error trace as CSV (t,err)")

    p_val = sub.add_parser("validate", help="check a config and its assumptions")
    p_val.add_argument("--config", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            config = load_config(args.config)
            trace, _ = run_experiment(config, out_dir=args.out)
            t_end = completion_time(trace, config.tol)
            print(f"rows={len(trace)} t_end={t_end} J_final={trace.j[-1]:.6e}")
            return 0
        if args.command == "sweep":
            config = load_config(args.config)
            rows = sweep_blocks(config, _parse_blocks(args.blocks), out_dir=args.out)
            for b, t_end, reals in rows:
                norm = "none" if t_end is None else f"{t_end / b:.17g}"
                print(f"B={b} t_end={t_end} t_end/B={norm} reals_tx={reals}")
            return 0
        if args.command == "consensus-demo":
            result = consensus_demo(args.n, args.blocks,
                                    schedule_rule=args.schedule, seed=args.seed,
                                    tol=args.tol, p=args.p)
            if args.out:
                lines = ["t,err"] + [
                    f"{t},{e:.17g}" for t, e in enumerate(result.errors)
                ]
                Path(args.out).write_text("\n".join(lines) + "\n")
            print(f"iterations={result.iterations} final_err={result.errors[-1]:.3e} "
                  f"fitted_rho={result.rho:.6f}")
            return 0
        if args.command == "validate":
            config = load_config(args.config)
            problems = validate_config(config)
            if problems:
                for p in problems:
                    print(f"violation: {p}", file=sys.stderr)
                return 1
            print("config ok")
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
