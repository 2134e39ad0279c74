"""Monte Carlo rollouts of the solved stage strategies."""

from __future__ import annotations

import bisect
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .game import (
    EvaderCaught,
    GameInstance,
    Graph,
    PursuerPosition,
    condition_not_caught,
    transform_belief,
)
from .stage import solve_stage_evader, solve_stage_pursuer

# an evader policy maps (graph, evader vertex, pursuer position, pursuer belief, rng) to a move
EvaderPolicy = Callable[[Graph, int, PursuerPosition, np.ndarray, np.random.Generator], int]


@dataclass(frozen=True)
class RolloutConfig:
    episodes: int = 10_000
    horizon_cap: int = 100
    seed: int = 0
    tail_tolerance: float = 1e-3

    @classmethod
    def for_tail(cls, gamma: float, tail_tolerance: float, episodes: int, seed: int = 0) -> "RolloutConfig":
        """Shortest horizon whose discounted tail is below ``tail_tolerance``."""
        cap = 1 if gamma == 0 else max(1, math.ceil(math.log(tail_tolerance) / math.log(gamma)))
        return cls(episodes, cap, seed, tail_tolerance)

    def check(self, gamma: float) -> None:
        if gamma**self.horizon_cap > self.tail_tolerance + 1e-15:
            raise ValueError(
                f"gamma^{self.horizon_cap} = {gamma**self.horizon_cap:.3g} exceeds the tail tolerance"
            )


@dataclass
class RolloutStats:
    mean: float
    std_error: float
    capture_times: Counter = field(default_factory=Counter)  # -1 marks truncated episodes
    episodes: int = 0
    belief_resets: int = 0


class _BeliefNode:
    """Stage solution at one (position, belief) pair plus its successor links."""

    __slots__ = ("pos", "belief", "moves", "occupied", "cdf", "evader", "evader_cdf", "next")

    def __init__(self, pos, belief, moves, probs, evader):
        self.pos = pos
        self.belief = belief
        self.moves = moves
        self.occupied = [m.occupied() for m in moves]
        # plain lists: bisect on them is much cheaper than numpy on tiny arrays
        cdf = np.cumsum(probs)
        cdf[-1] = 1.0
        self.cdf = cdf.tolist()
        self.evader = evader
        ecdf = np.cumsum(evader.rows, axis=1)
        ecdf[:, -1] = 1.0
        self.evader_cdf = ecdf.tolist()
        self.next: dict[int, _BeliefNode | None] = {}


class _StageCache:
    """Memoized stage solves keyed by position and belief rounded to 1e-9."""

    def __init__(self, graph: Graph, vf: Mapping[PursuerPosition, np.ndarray], gamma: float):
        self.graph, self.vf, self.gamma = graph, vf, gamma
        self._nodes: dict = {}

    def node(self, pos: PursuerPosition, belief: np.ndarray) -> _BeliefNode:
        key = (pos, tuple(np.round(belief, 9)))
        if key not in self._nodes:
            _, pursuer = solve_stage_pursuer(self.graph, pos, belief, self.vf, self.gamma)
            _, evader, _ = solve_stage_evader(self.graph, pos, belief, self.vf, self.gamma)
            moves = pursuer.support()
            probs = np.array([pursuer.marginal[m] for m in moves])
            self._nodes[key] = _BeliefNode(pos, belief, moves, probs / probs.sum(), evader)
        return self._nodes[key]

    def successor(self, node: _BeliefNode, move: int) -> _BeliefNode | None:
        """Node after the pursuer played ``node.moves[move]``; None if the model says caught."""
        if move not in node.next:
            s_p1 = node.moves[move]
            try:
                b = condition_not_caught(transform_belief(node.belief, node.evader, node.pos), s_p1)
            except EvaderCaught:
                node.next[move] = None
            else:
                node.next[move] = self.node(s_p1, b)
        return node.next[move]


def rollout(
    instance: GameInstance,
    final_vf: Mapping[PursuerPosition, np.ndarray],
    config: RolloutConfig,
    evader_policy: EvaderPolicy | None = None,
) -> RolloutStats:
    """Play ``config.episodes`` games and average the discounted capture reward.

    The pursuer plays his stage strategy at his current belief, which he updates
    with the equilibrium evader strategy. The evader follows that equilibrium
    strategy unless ``evader_policy`` replaces her. Episode ``i`` draws from its
    own generator seeded with ``(seed, i)``.
    """
    graph, gamma = instance.graph, instance.gamma
    config.check(gamma)
    cache = _StageCache(graph, final_vf, gamma)
    b0 = instance.initial_belief
    b0_cdf = np.cumsum(b0)
    b0_cdf[-1] = 1.0
    b0_cdf = b0_cdf.tolist()
    n = graph.n_vertices
    start = instance.initial_position
    root = None
    rewards = np.zeros(config.episodes)
    times: Counter = Counter()
    resets = 0
    for ep in range(config.episodes):
        rng = np.random.default_rng((config.seed, ep))
        draws = rng.random(2 * config.horizon_cap + 1).tolist()
        s_e = bisect.bisect_right(b0_cdf, draws[0])
        if s_e in start:
            rewards[ep] = 1.0
            times[0] += 1
            continue
        if root is None:
            root = cache.node(start, condition_not_caught(b0, start))
        node = root
        captured = -1
        for tau in range(1, config.horizon_cap + 1):
            move = bisect.bisect_right(node.cdf, draws[2 * tau - 1])
            if evader_policy is None:
                s_next = bisect.bisect_right(node.evader_cdf[s_e], draws[2 * tau])
            else:
                s_next = int(evader_policy(graph, s_e, node.pos, node.belief, rng))
            if s_next in node.occupied[move]:
                captured = tau
                break
            nxt = cache.successor(node, move)
            if nxt is None:
                # the pursuer's model of the evader was falsified; restart from ignorance
                s_p1 = node.moves[move]
                off = (~s_p1.mask(n)).astype(float)
                nxt = cache.node(s_p1, off / off.sum())
                resets += 1
            node, s_e = nxt, s_next
        if captured >= 0:
            rewards[ep] = gamma**captured
        times[captured] += 1
    se = float(rewards.std(ddof=1) / math.sqrt(config.episodes)) if config.episodes > 1 else 0.0
    return RolloutStats(float(rewards.mean()), se, times, config.episodes, resets)


def _distances(graph: Graph, sources) -> np.ndarray:
    n = graph.n_vertices
    dist = np.full(n, np.inf)
    frontier = list(sources)
    for s in frontier:
        dist[s] = 0
    while frontier:
        nxt = []
        for u in frontier:
            for w in graph.adj(u):
                if dist[w] == np.inf:
                    dist[w] = dist[u] + 1
                    nxt.append(w)
        frontier = nxt
    return dist


def _pick(options, rng) -> int:
    return int(options[int(rng.integers(len(options)))])


def random_walk(graph, s_e, pos, belief, rng):
    return _pick(graph.adj(s_e), rng)


def stay_put(graph, s_e, pos, belief, rng):
    return s_e if s_e in graph.adj(s_e) else _pick(graph.adj(s_e), rng)


def lazy_walk(graph, s_e, pos, belief, rng):
    if s_e in graph.adj(s_e) and rng.random() < 0.5:
        return s_e
    return random_walk(graph, s_e, pos, belief, rng)


def avoid_occupied(graph, s_e, pos, belief, rng):
    free = [v for v in graph.adj(s_e) if v not in pos]
    return _pick(free or graph.adj(s_e), rng)


def greedy_away(graph, s_e, pos, belief, rng):
    dist = _distances(graph, pos.vertices)
    adj = list(graph.adj(s_e))
    best = max(dist[v] for v in adj)
    return _pick([v for v in adj if dist[v] == best], rng)


def out_of_reach(graph, s_e, pos, belief, rng):
    reach = {w for u in pos for w in graph.adj(u)}
    safe = [v for v in graph.adj(s_e) if v not in reach]
    return _pick(safe or list(graph.adj(s_e)), rng)


def low_belief(graph, s_e, pos, belief, rng):
    adj = list(graph.adj(s_e))
    lowest = min(belief[v] for v in adj)
    return _pick([v for v in adj if belief[v] <= lowest + 1e-12], rng)


def first_neighbour(graph, s_e, pos, belief, rng):
    others = [v for v in graph.adj(s_e) if v != s_e]
    return others[0] if others else s_e


HEURISTIC_EVADERS: dict[str, EvaderPolicy] = {
    "random-walk": random_walk,
    "stay-put": stay_put,
    "lazy-walk": lazy_walk,
    "avoid-occupied": avoid_occupied,
    "greedy-away": greedy_away,
    "out-of-reach": out_of_reach,
    "low-belief": low_belief,
    "first-neighbour": first_neighbour,
}
