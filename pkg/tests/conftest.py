import numpy as np
import pytest

from pegame.game import (
    GameInstance,
    Graph,
    PursuerPosition,
    complete_graph,
    cycle_graph,
    path_graph,
    uniform_off,
)

P = PursuerPosition.of


def random_graph(n: int, seed: int) -> Graph:
    """First connected, non-complete seeded random graph at or after ``seed``."""
    while True:
        rng = np.random.default_rng(seed)
        edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < 0.5]
        loops = [v for v in range(n) if rng.random() < 0.5]
        try:
            g = Graph.from_edges(n, edges, self_loops=loops)
        except ValueError:  # a vertex without successors
            g = None
        if g is not None and len(edges) < n * (n - 1) // 2 and _connected(g):
            return g
        seed += 1


def _connected(g: Graph) -> bool:
    seen, stack = {0}, [0]
    while stack:
        for w in g.adj(stack.pop()):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == g.n_vertices


# the fixed cross-validation suite: name -> graph, all with the pursuer starting on 0
SUITE = {
    "K3": complete_graph(3),
    "path-3": path_graph(3),
    "cycle-4": cycle_graph(4),
    "random-4": random_graph(4, seed=7),
}


def instance(graph: Graph, gamma: float = 0.9, start=(0,)) -> GameInstance:
    pos = PursuerPosition(tuple(start))
    return GameInstance(graph, len(start), gamma, pos, uniform_off(graph.n_vertices, pos))


@pytest.fixture
def k3() -> Graph:
    return complete_graph(3)


@pytest.fixture
def path3() -> Graph:
    return path_graph(3)
