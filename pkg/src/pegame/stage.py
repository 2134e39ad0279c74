"""One-round maximin games solved as linear programs.

The pursuer picks a distribution over pairs (successor position, alpha-vector
of that successor); the evader, who knows her own vertex, picks a move per
vertex. Both programs share the same optimum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .game import EvaderStageStrategy, Graph, PursuerPosition, expand_pursuer_moves, make_belief
from .lp import LinearProgram, LpError, solve

SUPPORT_TOL = 1e-12


class MissingSuccessorError(KeyError):
    """The previous value function lacks a position reachable in one move."""


@dataclass(frozen=True)
class PursuerStageStrategy:
    """Joint weights over (successor, alpha index) and the induced move marginal."""

    weights: dict[tuple[PursuerPosition, int], float]
    marginal: dict[PursuerPosition, float]
    # sum of weight * alpha: the value of the continuation at each pure belief
    continuation: np.ndarray

    def support(self, tol: float = 1e-12) -> list[PursuerPosition]:
        return [p for p, w in sorted(self.marginal.items()) if w > tol]


@dataclass(frozen=True)
class StageSolution:
    value: float
    pursuer: PursuerStageStrategy
    evader: EvaderStageStrategy
    transformed_belief: np.ndarray


def _successor_pairs(graph: Graph, s_p0: PursuerPosition, v_prev: Mapping[PursuerPosition, np.ndarray]):
    pairs = []
    vectors = []
    for succ in expand_pursuer_moves(graph, s_p0):
        if succ not in v_prev:
            raise MissingSuccessorError(f"previous value function lacks position {succ}")
        for k, alpha in enumerate(np.asarray(v_prev[succ])):
            pairs.append((succ, k))
            vectors.append(alpha)
    return pairs, np.array(vectors)


def _check_off_belief(b_off: np.ndarray, s_p0: PursuerPosition) -> np.ndarray:
    b_off = np.asarray(b_off, dtype=float)
    if b_off[list(s_p0.vertices)].sum() > SUPPORT_TOL:
        raise ValueError("stage games take beliefs with no mass on the pursuer's vertices")
    return b_off


def solve_stage_pursuer(
    graph: Graph,
    s_p0: PursuerPosition,
    b_off: np.ndarray,
    v_prev: Mapping[PursuerPosition, np.ndarray],
    gamma: float,
) -> tuple[float, PursuerStageStrategy]:
    """Maximin one-step strategy of the pursuer at an uncaught belief."""
    b_off = _check_off_belief(b_off, s_p0)
    pairs, vectors = _successor_pairs(graph, s_p0, v_prev)
    n = graph.n_vertices
    support = [s for s in range(n) if b_off[s] > SUPPORT_TOL]
    n_pairs = len(pairs)
    n_vars = n_pairs + len(support)

    rows, senses, rhs = [], [], []
    for k, s in enumerate(support):
        for s_next in graph.adj(s):
            row = np.zeros(n_vars)
            row[:n_pairs] = vectors[:, s_next]
            row[n_pairs + k] = -1.0
            rows.append(row)
            senses.append(">=")
            rhs.append(0.0)
    row = np.zeros(n_vars)
    row[:n_pairs] = 1.0
    rows.append(row)
    senses.append("=")
    rhs.append(1.0)

    c = np.zeros(n_vars)
    c[n_pairs:] = gamma * b_off[support]
    lower = np.zeros(n_vars)
    lower[n_pairs:] = -np.inf
    sol = solve(LinearProgram(c, np.array(rows), senses, rhs, maximize=True, lower=lower))
    if not sol.optimal:
        raise LpError(f"pursuer stage LP ended {sol.status.value}")

    w = np.clip(sol.x[:n_pairs], 0.0, None)
    w /= w.sum()
    weights = {pair: float(x) for pair, x in zip(pairs, w)}
    marginal: dict[PursuerPosition, float] = {}
    for (succ, _), x in zip(pairs, w):
        marginal[succ] = marginal.get(succ, 0.0) + float(x)
    strategy = PursuerStageStrategy(weights, marginal, w @ vectors)
    return sol.objective, strategy


def solve_stage_evader(
    graph: Graph,
    s_p0: PursuerPosition,
    b_off: np.ndarray,
    v_prev: Mapping[PursuerPosition, np.ndarray],
    gamma: float,
) -> tuple[float, EvaderStageStrategy, np.ndarray]:
    """Minimax one-step strategy of the evader and the belief it induces."""
    b_off = _check_off_belief(b_off, s_p0)
    _, vectors = _successor_pairs(graph, s_p0, v_prev)
    n = graph.n_vertices
    caught = s_p0.mask(n)
    movers = [s for s in range(n) if not caught[s] and b_off[s] > SUPPORT_TOL]
    moves = [(s, t) for s in movers for t in graph.adj(s)]
    # variables: V, pi_e(s, t) for moves, b_pi(t) for every vertex
    n_moves = len(moves)
    n_vars = 1 + n_moves + n
    col_b = 1 + n_moves

    rows, senses, rhs = [], [], []
    for alpha in vectors:
        row = np.zeros(n_vars)
        row[0] = -1.0
        row[col_b:] = gamma * alpha
        rows.append(row)
        senses.append("<=")
        rhs.append(0.0)
    for t in range(n):
        row = np.zeros(n_vars)
        for k, (s, t2) in enumerate(moves):
            if t2 == t:
                row[1 + k] = b_off[s]
        row[col_b + t] = -1.0
        rows.append(row)
        senses.append("=")
        rhs.append(0.0)
    for s in movers:
        row = np.zeros(n_vars)
        for k, (s2, _) in enumerate(moves):
            if s2 == s:
                row[1 + k] = 1.0
        rows.append(row)
        senses.append("=")
        rhs.append(1.0)

    c = np.zeros(n_vars)
    c[0] = 1.0
    lower = np.zeros(n_vars)
    lower[0] = -np.inf
    sol = solve(LinearProgram(c, np.array(rows), senses, rhs, lower=lower))
    if not sol.optimal:
        raise LpError(f"evader stage LP ended {sol.status.value}")

    pi = EvaderStageStrategy.uniform(graph).rows.copy()
    for s in movers:
        pi[s] = 0.0
    for k, (s, t) in enumerate(moves):
        pi[s, t] = max(sol.x[1 + k], 0.0)
    pi /= pi.sum(axis=1, keepdims=True)
    evader = EvaderStageStrategy(pi)
    transformed = make_belief(b_off @ pi / (b_off @ pi).sum())
    return sol.objective, evader, transformed


def solve_stage(
    graph: Graph,
    s_p0: PursuerPosition,
    b_off: np.ndarray,
    v_prev: Mapping[PursuerPosition, np.ndarray],
    gamma: float,
) -> StageSolution:
    value, pursuer = solve_stage_pursuer(graph, s_p0, b_off, v_prev, gamma)
    _, evader, transformed = solve_stage_evader(graph, s_p0, b_off, v_prev, gamma)
    return StageSolution(value, pursuer, evader, transformed)


def split_belief(b: np.ndarray, s_p0: PursuerPosition) -> tuple[float, np.ndarray | None]:
    """Caught mass and the normalized uncaught belief (``None`` if all is caught)."""
    b = np.asarray(b, dtype=float)
    mask = s_p0.mask(b.size)
    caught = float(b[mask].sum())
    off = np.where(mask, 0.0, b)
    total = off.sum()
    if total <= SUPPORT_TOL:
        return caught, None
    return caught, off / total


def stage_value_at(
    graph: Graph,
    s_p0: PursuerPosition,
    b: np.ndarray,
    v_prev: Mapping[PursuerPosition, np.ndarray],
    gamma: float,
) -> float:
    """One application of the Bellman update at an arbitrary belief."""
    caught, off = split_belief(b, s_p0)
    if off is None:
        return 1.0
    value, _ = solve_stage_pursuer(graph, s_p0, off, v_prev, gamma)
    return caught + (1.0 - caught) * value
