"""The dynamic-programming operator on alpha-vector value functions."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import prod
from typing import Mapping

import numpy as np

from .alpha import (
    DEFAULT_ENVELOPE,
    EnvelopeConfig,
    ValueFunction,
    as_alpha_set,
    dominated_mask,
    extreme_points,
    prune,
)
from .game import Graph, PursuerPosition, reachable_positions
from .stage import PursuerStageStrategy, solve_stage_pursuer

log = logging.getLogger(__name__)


class EnumerationCapError(RuntimeError):
    """Full Q enumeration would exceed the configured number of combinations."""


class BackupIterationError(RuntimeError):
    """The witness loop hit its cap; ``best`` holds the envelope built so far."""

    def __init__(self, message: str, best: np.ndarray):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class BackupConfig:
    q_mode: str = "full"
    eps_improve: float = 1e-9
    enumeration_cap: int = 100_000
    max_witnesses: int = 200
    threads: int = 1
    envelope: EnvelopeConfig = field(default_factory=lambda: DEFAULT_ENVELOPE)

    def __post_init__(self):
        if self.q_mode not in ("full", "point"):
            raise ValueError(f"unknown q-mode {self.q_mode!r}")


@dataclass(frozen=True)
class QFunction:
    pi_p: dict[PursuerPosition, float]
    alphas: np.ndarray


def compose_from_continuation(
    graph: Graph, s_p0: PursuerPosition, continuation: np.ndarray, gamma: float
) -> np.ndarray:
    """Alpha-vector of "play this round, then continue with ``continuation``".

    The evader standing on a pursuer vertex is caught now (value 1); any other
    evader moves to the adjacent vertex with the lowest continuation value.
    A 2-d ``continuation`` is composed row by row.
    """
    cont = np.asarray(continuation, dtype=float)
    rows = np.atleast_2d(cont)
    out = np.empty_like(rows)
    for s in range(graph.n_vertices):
        if s in s_p0:
            out[:, s] = 1.0
        else:
            out[:, s] = gamma * rows[:, list(graph.adj(s))].min(axis=1)
    return out if cont.ndim == 2 else out[0]


def compose_alpha(
    graph: Graph,
    s_p0: PursuerPosition,
    pi_p: Mapping[PursuerPosition, float],
    choice: Mapping[PursuerPosition, np.ndarray],
    gamma: float,
) -> np.ndarray:
    """Compose one alpha-vector from a move distribution and one continuation per move."""
    n = graph.n_vertices
    cont = np.zeros(n)
    for succ, p in pi_p.items():
        if p > 0.0:
            cont += p * np.asarray(choice[succ], dtype=float)
    return compose_from_continuation(graph, s_p0, cont, gamma)


def q_function(
    graph: Graph,
    s_p0: PursuerPosition,
    pi_p: Mapping[PursuerPosition, float] | PursuerStageStrategy,
    v_prev: Mapping[PursuerPosition, np.ndarray],
    gamma: float,
    mode: str = "full",
    enumeration_cap: int = 100_000,
) -> QFunction:
    """Alpha-vectors of a fixed first-round move distribution.

    ``full`` enumerates one continuation vector per successor in the support;
    ``point`` needs the stage strategy and composes its joint continuation.
    """
    if isinstance(pi_p, PursuerStageStrategy):
        strategy = pi_p
        marginal = dict(strategy.marginal)
    else:
        strategy = None
        marginal = dict(pi_p)
    support = [s for s in sorted(marginal) if marginal[s] > 1e-12]

    if mode == "point":
        if strategy is None:
            raise ValueError("point mode needs the stage strategy, not just its marginal")
        alpha = compose_from_continuation(graph, s_p0, strategy.continuation, gamma)
        return QFunction(marginal, alpha[None, :])
    if mode != "full":
        raise ValueError(f"unknown q-mode {mode!r}")

    sizes = [len(v_prev[s]) for s in support]
    if prod(sizes) > enumeration_cap:
        raise EnumerationCapError(f"{prod(sizes)} continuation combinations exceed {enumeration_cap}")
    # composition is monotone in the continuation, so dominated partial sums can go
    partial = np.zeros((1, graph.n_vertices))
    for s in support:
        alphas = np.asarray(v_prev[s])
        partial = (partial[:, None, :] + marginal[s] * alphas[None, :, :]).reshape(-1, graph.n_vertices)
        partial = partial[~dominated_mask(partial, tol=0.0)]
    composed = compose_from_continuation(graph, s_p0, partial, gamma)
    if strategy is not None:
        point = compose_from_continuation(graph, s_p0, strategy.continuation, gamma)
        composed = np.vstack([composed, point])
    return QFunction(marginal, prune(composed))


def _belief_key(b: np.ndarray) -> tuple:
    return tuple(np.round(b, 12))


def construct_value_function(
    graph: Graph,
    s_p0: PursuerPosition,
    v_prev: Mapping[PursuerPosition, np.ndarray],
    gamma: float,
    config: BackupConfig = BackupConfig(),
) -> np.ndarray:
    """Incrementally build the horizon-t alpha-set at ``s_p0``.

    Starts from the strategy that is optimal at the uniform uncaught belief,
    then repeatedly checks the vertices of the current envelope on the uncaught
    face and adds the strategy found at every vertex where the stage LP beats
    the envelope by more than ``eps_improve``.
    """
    n = graph.n_vertices
    free = [v for v in range(n) if v not in s_p0]
    if not free:
        return np.ones((1, n))

    cache: dict[tuple, tuple[float, PursuerStageStrategy]] = {}

    def stage(b: np.ndarray) -> tuple[float, PursuerStageStrategy]:
        key = _belief_key(b)
        if key not in cache:
            cache[key] = solve_stage_pursuer(graph, s_p0, b, v_prev, gamma)
        return cache[key]

    mode = config.q_mode

    def vectors_for(strategy: PursuerStageStrategy) -> np.ndarray:
        nonlocal mode
        if mode == "full":
            try:
                return q_function(graph, s_p0, strategy, v_prev, gamma, "full", config.enumeration_cap).alphas
            except EnumerationCapError as err:
                log.info("position %s: %s; switching to point mode", s_p0, err)
                mode = "point"
        return q_function(graph, s_p0, strategy, v_prev, gamma, "point").alphas

    seed = np.zeros(n)
    seed[free] = 1.0 / len(free)
    alphas = prune(vectors_for(stage(seed)[1]))
    witnesses = 1
    while True:
        new = []
        for b in extreme_points(alphas, free, config.envelope):
            value, strategy = stage(b)
            if value - float(np.max(alphas @ b)) > config.eps_improve:
                new.append(vectors_for(strategy))
                witnesses += 1
        if not new:
            return alphas
        alphas = prune(np.vstack([alphas] + new))
        if witnesses > config.max_witnesses:
            raise BackupIterationError(
                f"position {s_p0}: more than {config.max_witnesses} improving witnesses", alphas
            )


def apply_H(
    graph: Graph,
    start: PursuerPosition,
    v_prev: Mapping[PursuerPosition, np.ndarray],
    gamma: float,
    config: BackupConfig = BackupConfig(),
) -> ValueFunction:
    """One Bellman backup for every position reachable from ``start``."""
    positions = reachable_positions(graph, start)
    missing = [p for p in positions if p not in v_prev]
    if missing:
        raise KeyError(f"previous value function lacks positions {missing}")

    def one(pos: PursuerPosition) -> np.ndarray:
        return construct_value_function(graph, pos, v_prev, gamma, config)

    if config.threads > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            sets = list(pool.map(one, positions))
    else:
        sets = [one(p) for p in positions]
    return ValueFunction(dict(zip(positions, sets)))


def random_value_function(
    graph: Graph, start: PursuerPosition, rng: np.random.Generator, max_alphas: int = 3
) -> ValueFunction:
    """Random alpha-sets in [0, 1] for every reachable position (test input)."""
    sets = {}
    for pos in reachable_positions(graph, start):
        k = int(rng.integers(1, max_alphas + 1))
        sets[pos] = as_alpha_set(rng.random((k, graph.n_vertices)))
    return ValueFunction(sets)
