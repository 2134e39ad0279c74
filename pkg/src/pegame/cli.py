"""Command-line interface: ``pegame solve | value | oracle-check | simulate``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .backup import BackupConfig, BackupIterationError, apply_H
from .efg import TreeTooLarge, oracle_value
from .game import PursuerPosition, make_belief
from .io import InstanceError, SolutionError, load_instance, load_solution, write_solution
from .lp import LpError
from .simulate import RolloutConfig, rollout
from .solver import horizon_zero, value_iteration, write_trace

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_NUMERIC = 0, 1, 2, 3

EPS_HELP = (
    "stop when min(gamma^t, residual*gamma/(1-gamma)) <= EPS, where residual is the "
    "max-norm distance between the last two iterates"
)


def _parse_belief(text: str, n: int) -> np.ndarray:
    values = [float(x) for x in text.replace(",", " ").split()]
    if len(values) != n:
        raise ValueError(f"belief has {len(values)} entries, expected {n}")
    return make_belief(values)


def cmd_solve(args) -> int:
    instance = load_instance(args.instance)
    config = BackupConfig(q_mode=args.q_mode, threads=args.threads)
    report = value_iteration(instance, args.eps, args.max_iters, config)
    out = Path(args.out) if args.out else Path(args.instance).with_suffix(".solution")
    trace = Path(args.trace) if args.trace else out.with_suffix(".trace")
    write_solution(out, instance, report)
    write_trace(report, instance.gamma, trace)
    b0 = instance.initial_belief
    value = report.final.value(instance.initial_position, b0)
    print(f"iterations {report.iterations}")
    print(f"residual {report.residual:.6e}")
    print(f"bound {report.bound:.6e}")
    print(f"value {value:.12f}")
    print(f"solution {out}")
    print(f"trace {trace}")
    if not report.converged:
        print("warning: iteration limit reached before the stopping rule", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_value(args) -> int:
    sol = load_solution(args.solution)
    inst = sol.instance
    pos = PursuerPosition.parse(args.position) if args.position else inst.initial_position
    if pos not in sol.value_function:
        raise InstanceError(f"position {pos} is not part of this solution")
    belief = _parse_belief(args.belief, inst.n_vertices) if args.belief else inst.initial_belief
    print(f"{sol.value(pos, belief):.12f}")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    if args.t < 1:
        raise InstanceError("--t must be at least 1")
    instance = load_instance(args.instance)
    graph, start, gamma = instance.graph, instance.initial_position, instance.gamma
    v = horizon_zero(graph, start)
    for _ in range(args.t):
        v = apply_H(graph, start, v, gamma)
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.samples):
        b = make_belief(rng.dirichlet(np.ones(graph.n_vertices)))
        dp = v.value(start, b)
        exact = oracle_value(graph, args.t, b, start=start, gamma=gamma)
        worst = max(worst, abs(dp - exact))
    print(f"max |DP - EFG| = {worst:.3e} over {args.samples} beliefs at horizon {args.t}")
    return EXIT_OK if worst <= 1e-6 else EXIT_NUMERIC


def cmd_simulate(args) -> int:
    sol = load_solution(args.solution)
    inst = sol.instance
    config = RolloutConfig.for_tail(inst.gamma, args.tail, args.episodes, args.seed)
    stats = rollout(inst, sol.value_function, config)
    value = sol.value(inst.initial_position, inst.initial_belief)
    print(f"episodes {stats.episodes}")
    print(f"mean {stats.mean:.6f}")
    print(f"std_error {stats.std_error:.6f}")
    print(f"value {value:.6f}")
    print(f"horizon_cap {config.horizon_cap}")
    hist = " ".join(f"{t}:{c}" for t, c in sorted(stats.capture_times.items()))
    print(f"capture_times {hist}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pegame", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run value iteration on an instance file")
    p.add_argument("instance")
    p.add_argument("--eps", type=float, default=1e-3, help=EPS_HELP)
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--q-mode", choices=["full", "point"], default="full")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", help="solution file (default: <instance>.solution)")
    p.add_argument("--trace", help="iteration trace file (default: <out>.trace)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("value", help="evaluate a solved value function")
    p.add_argument("solution")
    p.add_argument("--position", help="comma-separated pursuer vertices (default: start)")
    p.add_argument("--belief", help="comma-separated probabilities (default: initial belief)")
    p.set_defaults(func=cmd_value)

    p = sub.add_parser("oracle-check", help="compare horizon-t DP values with the exact game tree")
    p.add_argument("instance")
    p.add_argument("--t", type=int, default=1)
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("simulate", help="Monte Carlo rollouts of a solution")
    p.add_argument("solution")
    p.add_argument("--episodes", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tail", type=float, default=1e-3, help="discounted tail tolerance gamma^T")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    # LinAlgError subclasses ValueError, so the numeric clause must come first
    except (LpError, BackupIterationError, TreeTooLarge, np.linalg.LinAlgError) as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InstanceError, SolutionError, OSError, ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
