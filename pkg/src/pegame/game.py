"""Arena, pursuer positions, beliefs and the two belief-update rules."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

BELIEF_TOL = 1e-9


class DegenerateBeliefError(ValueError):
    """Raised when a belief update would divide by zero probability mass."""


class EvaderCaught(DegenerateBeliefError):
    """All remaining belief mass lies on pursuer vertices."""


@dataclass(frozen=True)
class Graph:
    """Directed graph with explicit self-loops.

    ``adjacency[v]`` is the sorted, duplicate-free tuple of successors of ``v``.
    Every vertex needs at least one successor since every unit moves each round.
    """

    adjacency: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        n = len(self.adjacency)
        if n == 0:
            raise ValueError("graph needs at least one vertex")
        canon = []
        for v, succ in enumerate(self.adjacency):
            succ = tuple(sorted(set(int(u) for u in succ)))
            if not succ:
                raise ValueError(f"vertex {v} has no successors")
            if succ[0] < 0 or succ[-1] >= n:
                raise ValueError(f"vertex {v} has an out-of-range successor")
            canon.append(succ)
        object.__setattr__(self, "adjacency", tuple(canon))

    @classmethod
    def from_edges(
        cls,
        n_vertices: int,
        edges: Iterable[Sequence[int]],
        directed: bool = False,
        self_loops: Iterable[int] = (),
    ) -> "Graph":
        if n_vertices <= 0:
            raise ValueError("vertex count must be positive")
        adj: list[set[int]] = [set() for _ in range(n_vertices)]
        for u, v in edges:
            for w in (u, v):
                if not 0 <= w < n_vertices:
                    raise ValueError(f"edge endpoint {w} out of range")
            adj[u].add(v)
            if not directed:
                adj[v].add(u)
        for v in self_loops:
            if not 0 <= v < n_vertices:
                raise ValueError(f"self-loop vertex {v} out of range")
            adj[v].add(v)
        return cls(tuple(tuple(s) for s in adj))

    @property
    def n_vertices(self) -> int:
        return len(self.adjacency)

    def adj(self, v: int) -> tuple[int, ...]:
        return self.adjacency[v]


def complete_graph(n: int) -> Graph:
    """Complete graph on ``n`` vertices with a self-loop on every vertex."""
    return Graph(tuple(tuple(range(n)) for _ in range(n)))


def path_graph(n: int) -> Graph:
    edges = [(i, i + 1) for i in range(n - 1)]
    return Graph.from_edges(n, edges, self_loops=range(n))


def cycle_graph(n: int) -> Graph:
    edges = [(i, (i + 1) % n) for i in range(n)]
    return Graph.from_edges(n, edges, self_loops=range(n))


@dataclass(frozen=True, order=True)
class PursuerPosition:
    """Multiset of the vertices occupied by the pursuer's units (sorted)."""

    vertices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(sorted(int(v) for v in self.vertices)))
        if not self.vertices:
            raise ValueError("a pursuer position needs at least one unit")

    @classmethod
    def of(cls, *vertices: int) -> "PursuerPosition":
        return cls(tuple(vertices))

    def __contains__(self, v: object) -> bool:
        return v in self.vertices

    def __iter__(self):
        return iter(self.vertices)

    def __len__(self) -> int:
        return len(self.vertices)

    def occupied(self) -> frozenset[int]:
        return frozenset(self.vertices)

    def mask(self, n_vertices: int) -> np.ndarray:
        m = np.zeros(n_vertices, dtype=bool)
        m[list(self.vertices)] = True
        return m

    def validate(self, graph: Graph, n_units: int | None = None) -> None:
        if n_units is not None and len(self.vertices) != n_units:
            raise ValueError(f"expected {n_units} units, got {len(self.vertices)}")
        for v in self.vertices:
            if not 0 <= v < graph.n_vertices:
                raise ValueError(f"pursuer vertex {v} out of range")

    def __str__(self) -> str:
        return ",".join(str(v) for v in self.vertices)

    @classmethod
    def parse(cls, text: str) -> "PursuerPosition":
        return cls(tuple(int(t) for t in text.replace(" ", "").split(",") if t))


def make_belief(mass: Sequence[float] | np.ndarray, tol: float = BELIEF_TOL) -> np.ndarray:
    """Validate a probability vector and renormalize it.

    Beliefs are plain read-only float arrays; this is the only constructor that
    checks them.
    """
    b = np.array(mass, dtype=float)
    if b.ndim != 1 or b.size == 0:
        raise ValueError("belief must be a nonempty vector")
    if not np.all(np.isfinite(b)):
        raise ValueError("belief has non-finite entries")
    if b.min() < -tol:
        raise ValueError(f"belief has negative mass {b.min()}")
    total = b.sum()
    if abs(total - 1.0) > tol:
        raise ValueError(f"belief mass sums to {total}, not 1")
    b = np.clip(b, 0.0, None)
    b /= b.sum()
    b.flags.writeable = False
    return b


def point_belief(n: int, v: int) -> np.ndarray:
    b = np.zeros(n)
    b[v] = 1.0
    return make_belief(b)


def uniform_off(n: int, pos: PursuerPosition) -> np.ndarray:
    b = (~pos.mask(n)).astype(float)
    if b.sum() == 0:
        raise DegenerateBeliefError("every vertex is occupied by the pursuer")
    return make_belief(b / b.sum())


@dataclass(frozen=True, eq=False)
class EvaderStageStrategy:
    """One-step evader strategy: ``rows[v]`` is a distribution over all vertices."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)

    def validate(self, graph: Graph, tol: float = BELIEF_TOL) -> None:
        n = graph.n_vertices
        if self.rows.shape != (n, n):
            raise ValueError("evader strategy shape does not match the graph")
        for v in range(n):
            row = self.rows[v]
            if abs(row.sum() - 1.0) > tol or row.min() < -tol:
                raise ValueError(f"row {v} is not a distribution")
            outside = np.ones(n, dtype=bool)
            outside[list(graph.adj(v))] = False
            if np.any(np.abs(row[outside]) > tol):
                raise ValueError(f"row {v} moves to a non-adjacent vertex")

    @classmethod
    def uniform(cls, graph: Graph) -> "EvaderStageStrategy":
        n = graph.n_vertices
        rows = np.zeros((n, n))
        for v in range(n):
            adj = list(graph.adj(v))
            rows[v, adj] = 1.0 / len(adj)
        return cls(rows)

    @classmethod
    def stay(cls, graph: Graph) -> "EvaderStageStrategy":
        n = graph.n_vertices
        for v in range(n):
            if v not in graph.adj(v):
                raise ValueError(f"vertex {v} has no self-loop")
        return cls(np.eye(n))


@dataclass(frozen=True)
class GameInstance:
    graph: Graph
    n_units: int
    gamma: float
    initial_position: PursuerPosition
    initial_belief: np.ndarray = field(compare=False)

    def __post_init__(self):
        if self.n_units < 1:
            raise ValueError("need at least one pursuer unit")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"discount {self.gamma} outside [0, 1)")
        self.initial_position.validate(self.graph, self.n_units)
        b = make_belief(self.initial_belief)
        if b.size != self.graph.n_vertices:
            raise ValueError(
                f"belief has {b.size} entries, graph has {self.graph.n_vertices} vertices"
            )
        object.__setattr__(self, "initial_belief", b)

    @property
    def n_vertices(self) -> int:
        return self.graph.n_vertices


def expand_pursuer_moves(graph: Graph, pos: PursuerPosition) -> list[PursuerPosition]:
    """All positions reachable in one round, sorted and de-duplicated."""
    out = {
        PursuerPosition(combo)
        for combo in itertools.product(*(graph.adj(v) for v in pos.vertices))
    }
    return sorted(out)


def reachable_positions(graph: Graph, start: PursuerPosition) -> list[PursuerPosition]:
    """Breadth-first closure of :func:`expand_pursuer_moves` from ``start``."""
    seen = {start}
    frontier = [start]
    while frontier:
        nxt = []
        for pos in frontier:
            for succ in expand_pursuer_moves(graph, pos):
                if succ not in seen:
                    seen.add(succ)
                    nxt.append(succ)
        frontier = nxt
    return sorted(seen)


def transform_belief(
    b: np.ndarray, pi_e: EvaderStageStrategy, s_p0: PursuerPosition
) -> np.ndarray:
    """Push the uncaught part of ``b`` through the evader's one-step strategy."""
    b = np.asarray(b, dtype=float)
    off = b * ~s_p0.mask(b.size)
    total = off.sum()
    if total <= 0.0:
        raise DegenerateBeliefError("no belief mass outside the pursuer's vertices")
    out = off @ pi_e.rows / total
    return make_belief(out / out.sum())


def condition_not_caught(b: np.ndarray, s_p1: PursuerPosition) -> np.ndarray:
    """Condition ``b`` on the evader not standing on any vertex of ``s_p1``."""
    b = np.asarray(b, dtype=float)
    off = b * ~s_p1.mask(b.size)
    total = off.sum()
    if total <= 0.0:
        raise EvaderCaught("evader is surely caught")
    return make_belief(off / total)
