import itertools

import numpy as np
import pytest

from conftest import random_graph
from pegame.alpha import ValueFunction
from pegame.backup import random_value_function
from pegame.game import PursuerPosition, complete_graph, path_graph, transform_belief
from pegame.solver import horizon_zero
from pegame.stage import (
    MissingSuccessorError,
    solve_stage,
    solve_stage_evader,
    solve_stage_pursuer,
    split_belief,
    stage_value_at,
)

P = PursuerPosition.of
GAMMA = 0.9


def best_pure_response(graph, s_p0, b_off, strategy, gamma):
    """Lowest pursuer payoff over every deterministic evader move map."""
    cont = strategy.continuation
    free = [s for s in range(graph.n_vertices) if b_off[s] > 1e-12]
    best = np.inf
    for moves in itertools.product(*(graph.adj(s) for s in free)):
        best = min(best, gamma * sum(b_off[s] * cont[t] for s, t in zip(free, moves)))
    return best


def zero_vf(graph, start):
    return ValueFunction({p: np.zeros_like(a) for p, a in horizon_zero(graph, start).items()})


class TestExamples:
    def test_k3_uniform(self, k3):
        sol = solve_stage(k3, P(0), np.array([0, 0.5, 0.5]), horizon_zero(k3, P(0)), GAMMA)
        assert sol.value == pytest.approx(0.3, abs=1e-9)
        for v in range(3):
            assert sol.pursuer.marginal[P(v)] == pytest.approx(1 / 3, abs=1e-9)

    def test_k3_every_evader_strategy_is_optimal(self, k3):
        _, strategy = solve_stage_pursuer(k3, P(0), np.array([0, 0.5, 0.5]), horizon_zero(k3, P(0)), GAMMA)
        b = np.array([0, 0.5, 0.5])
        assert best_pure_response(k3, P(0), b, strategy, GAMMA) == pytest.approx(0.3, abs=1e-9)

    def test_zero_continuation(self, path3):
        vp, _ = solve_stage_pursuer(path3, P(1), np.array([0.5, 0, 0.5]), zero_vf(path3, P(1)), GAMMA)
        ve, _, _ = solve_stage_evader(path3, P(1), np.array([0.5, 0, 0.5]), zero_vf(path3, P(1)), GAMMA)
        assert vp == pytest.approx(0.0, abs=1e-12) and ve == pytest.approx(0.0, abs=1e-12)

    def test_path_two_by_two(self, path3):
        b = np.array([0, 0, 1.0])
        sol = solve_stage(path3, P(1), b, horizon_zero(path3, P(1)), GAMMA)
        assert sol.value == pytest.approx(0.45, abs=1e-9)
        assert sol.pursuer.marginal[P(1)] == pytest.approx(0.5, abs=1e-9)
        assert sol.pursuer.marginal[P(2)] == pytest.approx(0.5, abs=1e-9)
        assert sol.pursuer.marginal.get(P(0), 0.0) == pytest.approx(0.0, abs=1e-9)
        assert np.allclose(sol.evader.rows[2], [0, 0.5, 0.5], atol=1e-9)

    def test_stage_value_at(self, k3):
        v0 = horizon_zero(k3, P(0))
        assert stage_value_at(k3, P(0), np.array([0.4, 0.3, 0.3]), v0, GAMMA) == pytest.approx(0.58, abs=1e-9)
        assert stage_value_at(k3, P(0), np.array([1.0, 0, 0]), v0, GAMMA) == 1.0
        assert stage_value_at(k3, P(0), np.array([0.4, 0.3, 0.3]), v0, 0.0) == pytest.approx(0.4, abs=1e-12)


class TestContracts:
    def test_missing_successor(self, k3):
        v0 = horizon_zero(k3, P(0))
        partial = ValueFunction({p: a for p, a in v0.items() if p != P(2)})
        with pytest.raises(MissingSuccessorError):
            solve_stage_pursuer(k3, P(0), np.array([0, 0.5, 0.5]), partial, GAMMA)

    def test_rejects_mass_on_pursuer(self, k3):
        with pytest.raises(ValueError):
            solve_stage_pursuer(k3, P(0), np.array([0.2, 0.4, 0.4]), horizon_zero(k3, P(0)), GAMMA)

    def test_split_belief(self):
        caught, off = split_belief(np.array([0.2, 0.3, 0.5]), P(0))
        assert caught == pytest.approx(0.2) and np.allclose(off, [0, 0.375, 0.625])
        assert split_belief(np.array([1.0, 0, 0]), P(0)) == (1.0, None)

    def test_strategy_invariants(self, path3):
        rng = np.random.default_rng(0)
        v = random_value_function(path3, P(1), rng)
        _, s = solve_stage_pursuer(path3, P(1), np.array([0.3, 0, 0.7]), v, GAMMA)
        assert sum(s.weights.values()) == pytest.approx(1.0, abs=1e-8)
        assert min(s.weights.values()) >= 0.0
        for pos, m in s.marginal.items():
            assert m == pytest.approx(sum(w for (p, _), w in s.weights.items() if p == pos), abs=1e-9)


def _random_case(rng):
    graph = random_graph(int(rng.integers(3, 6)), seed=int(rng.integers(1 << 30)))
    n = graph.n_vertices
    pos = P(int(rng.integers(n)))
    free = [v for v in range(n) if v not in pos]
    b = np.zeros(n)
    b[free] = rng.dirichlet(np.ones(len(free)))
    return graph, pos, b, random_value_function(graph, pos, rng, max_alphas=4), float(rng.uniform(0.1, 0.99))


class TestProperties:
    def test_duality_and_transformed_belief(self):
        rng = np.random.default_rng(1)
        for _ in range(60):
            graph, pos, b, v, gamma = _random_case(rng)
            sol = solve_stage(graph, pos, b, v, gamma)
            ve, evader, _ = solve_stage_evader(graph, pos, b, v, gamma)
            assert sol.value == pytest.approx(ve, abs=1e-7)
            assert 0.0 <= sol.value <= gamma + 1e-12
            assert np.allclose(sol.transformed_belief, transform_belief(b, sol.evader, pos), atol=1e-7)

    def test_monotone_in_continuation(self):
        rng = np.random.default_rng(2)
        for _ in range(40):
            graph, pos, b, v, gamma = _random_case(rng)
            bigger = ValueFunction({p: a + rng.random(a.shape) * 0.2 for p, a in v.items()})
            low, _ = solve_stage_pursuer(graph, pos, b, v, gamma)
            high, _ = solve_stage_pursuer(graph, pos, b, bigger, gamma)
            assert high >= low - 1e-9

    def test_maximin_against_pure_evaders(self):
        rng = np.random.default_rng(3)
        for _ in range(40):
            graph, pos, b, v, gamma = _random_case(rng)
            value, strategy = solve_stage_pursuer(graph, pos, b, v, gamma)
            assert best_pure_response(graph, pos, b, strategy, gamma) >= value - 1e-7

    def test_two_units(self):
        g = path_graph(4)
        v0 = horizon_zero(g, P(0, 3))
        sol = solve_stage(g, P(0, 3), np.array([0, 0.5, 0.5, 0]), v0, GAMMA)
        ve, _, _ = solve_stage_evader(g, P(0, 3), np.array([0, 0.5, 0.5, 0]), v0, GAMMA)
        assert sol.value == pytest.approx(ve, abs=1e-9)


def test_uniform_stage_on_k4():
    g = complete_graph(4)
    sol = solve_stage(g, P(0), np.array([0, 1 / 3, 1 / 3, 1 / 3]), horizon_zero(g, P(0)), GAMMA)
    assert sol.value == pytest.approx(GAMMA / 4, abs=1e-9)
