"""Value iteration driver."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .alpha import ValueFunction, exact_enumeration_possible, max_norm_distance
from .backup import BackupConfig, apply_H
from .game import GameInstance, Graph, PursuerPosition, reachable_positions

log = logging.getLogger(__name__)


@dataclass
class SolveReport:
    iterations: int
    residuals: list[float]
    bound: float
    final: ValueFunction
    wall_times: list[float]
    converged: bool
    stop_reason: str
    exact_residuals: bool = True
    history: list[ValueFunction] = field(default_factory=list, repr=False)

    @property
    def residual(self) -> float:
        return self.residuals[-1] if self.residuals else float("nan")


def horizon_zero(graph: Graph, start: PursuerPosition) -> ValueFunction:
    """Reward 1 exactly when the evader starts under a pursuer unit."""
    sets = {}
    for pos in reachable_positions(graph, start):
        sets[pos] = pos.mask(graph.n_vertices).astype(float)[None, :]
    return ValueFunction(sets)


def _exact(v: ValueFunction, w: ValueFunction, config: BackupConfig) -> bool:
    return all(
        exact_enumeration_possible(len(v[p]), len(v[p][0]), config.envelope)
        and exact_enumeration_possible(len(w[p]), len(w[p][0]), config.envelope)
        for p in v
    )


def value_iteration(
    instance: GameInstance,
    target_eps: float = 1e-3,
    max_iters: int = 1000,
    config: BackupConfig = BackupConfig(),
    stopping: str = "either",
    keep_history: bool = False,
) -> SolveReport:
    """Iterate the backup from the horizon-0 value function.

    ``stopping="either"`` ends at the first iteration where gamma**t <= eps or
    the successive-iterate residual is at most eps*(1-gamma)/gamma; ``"bound"``
    only uses gamma**t <= eps.
    """
    if target_eps <= 0:
        raise ValueError("target_eps must be positive")
    if stopping not in ("either", "bound"):
        raise ValueError(f"unknown stopping rule {stopping!r}")
    gamma = instance.gamma
    graph, start = instance.graph, instance.initial_position
    v = horizon_zero(graph, start)
    history = [v] if keep_history else []
    residuals: list[float] = []
    walls: list[float] = []
    exact = True
    cauchy = target_eps * (1 - gamma) / gamma if gamma > 0 else np.inf
    t = 0
    reason = "max-iters"
    converged = False
    while t < max_iters:
        t0 = time.perf_counter()
        w = apply_H(graph, start, v, gamma, config)
        exact &= _exact(v, w, config)
        res = max_norm_distance(w, v, config.envelope)
        walls.append(time.perf_counter() - t0)
        residuals.append(res)
        t += 1
        v = w
        if keep_history:
            history.append(v)
        log.info("iteration %d residual %.3e bound %.3e", t, res, gamma**t)
        if gamma**t <= target_eps:
            reason, converged = "bound", True
            break
        if stopping == "either" and res <= cauchy:
            reason, converged = "residual", True
            break
    return SolveReport(
        iterations=t,
        residuals=residuals,
        bound=gamma**t,
        final=v,
        wall_times=walls,
        converged=converged,
        stop_reason=reason,
        exact_residuals=exact,
        history=history,
    )


def value_at(report: SolveReport, position: PursuerPosition, belief: np.ndarray) -> float:
    if position not in report.final:
        raise KeyError(f"position {position} is not reachable in this solution")
    return report.final.value(position, np.asarray(belief, dtype=float))


def write_trace(report: SolveReport, gamma: float, path: str | Path) -> None:
    """One line per iteration: ``t residual gamma^t wall_ms``."""
    lines = [
        f"{t} {res:.17g} {gamma**t:.17g} {1000 * wall:.3f}"
        for t, (res, wall) in enumerate(zip(report.residuals, report.wall_times), start=1)
    ]
    Path(path).write_text("\n".join(lines) + "\n")
