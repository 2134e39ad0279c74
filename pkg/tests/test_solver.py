import numpy as np
import pytest

from conftest import SUITE, instance
from pegame.alpha import extreme_points
from pegame.backup import apply_H
from pegame.efg import oracle_value
from pegame.game import GameInstance, Graph, PursuerPosition, complete_graph
from pegame.solver import horizon_zero, value_at, value_iteration, write_trace
from pegame.stage import stage_value_at

P = PursuerPosition.of


@pytest.fixture(scope="module")
def k3_solved():
    return value_iteration(instance(complete_graph(3), 0.9), 1e-3)


class TestHorizonZero:
    def test_single_unit(self, k3):
        assert np.array_equal(horizon_zero(k3, P(0))[P(0)], [[1, 0, 0]])

    def test_two_units(self, k3):
        assert np.array_equal(horizon_zero(k3, P(0, 1))[P(0, 1)], [[1, 1, 0]])

    def test_is_caught_mass(self):
        g = SUITE["random-4"]
        v = horizon_zero(g, P(0))
        for b in np.random.default_rng(0).dirichlet(np.ones(4), size=20):
            for pos in v:
                assert v.value(pos, b) == pytest.approx(sum(b[s] for s in set(pos.vertices)))


class TestValueIteration:
    def test_k3_fixed_point(self, k3_solved):
        assert k3_solved.converged
        assert value_at(k3_solved, P(0), np.array([0, 0.5, 0.5])) == pytest.approx(0.75, abs=1e-3)
        assert value_at(k3_solved, P(0), np.array([0, 0.3, 0.7])) == pytest.approx(0.75, abs=1e-3)
        assert value_at(k3_solved, P(1), np.array([0, 1.0, 0])) == 1.0

    def test_bound_only_stopping(self):
        rep = value_iteration(instance(complete_graph(3), 0.9), 1e-3, stopping="bound")
        assert rep.iterations == 66 and rep.stop_reason == "bound"
        assert rep.bound == pytest.approx(0.9**66)

    def test_no_discount(self):
        rep = value_iteration(instance(complete_graph(3), 0.0), 1e-3)
        assert rep.iterations == 1 and rep.converged
        assert np.allclose(rep.final[P(0)], [[1, 0, 0]])

    def test_refuge_has_value_zero(self):
        g = Graph.from_edges(4, [(0, 1), (2, 3)], self_loops=range(4))
        inst = GameInstance(g, 1, 0.9, P(0), [0, 0, 0.5, 0.5])
        rep = value_iteration(inst, 1e-3)
        assert value_at(rep, P(0), inst.initial_belief) == pytest.approx(0.0, abs=1e-12)

    def test_trace_contracts(self, k3_solved):
        res = k3_solved.residuals
        assert all(res[k] <= 0.9 * res[k - 1] + 1e-7 for k in range(1, len(res)))
        assert k3_solved.bound == pytest.approx(0.9**k3_solved.iterations)
        assert len(k3_solved.wall_times) == k3_solved.iterations

    def test_fixed_point_property(self, k3_solved):
        g, final = complete_graph(3), k3_solved.final
        h = apply_H(g, P(0), final, 0.9)
        for pos in final:
            free = [v for v in range(3) if v not in pos]
            for b in extreme_points(np.vstack([final[pos], h[pos]]), free):
                gap = abs(h.value(pos, b) - final.value(pos, b))
                assert gap <= k3_solved.residual + 1e-7

    def test_matches_one_more_backup(self, k3_solved):
        for b in np.random.default_rng(1).dirichlet(np.ones(3), size=20):
            lhs = value_at(k3_solved, P(0), b)
            rhs = stage_value_at(complete_graph(3), P(0), b, k3_solved.final, 0.9)
            assert abs(lhs - rhs) <= 1e-3 * 1.9

    def test_max_iters_flags_non_converged(self):
        rep = value_iteration(instance(complete_graph(3), 0.9), 1e-6, max_iters=3)
        assert not rep.converged and rep.stop_reason == "max-iters" and rep.iterations == 3

    def test_iterates_match_oracle(self):
        g = SUITE["path-3"]
        rep = value_iteration(instance(g, 0.9), 1e-9, max_iters=2, keep_history=True)
        rng = np.random.default_rng(2)
        for t in (1, 2):
            for b in rng.dirichlet(np.ones(3), size=6):
                exact = oracle_value(g, t, b, P(0), 0.9)
                assert rep.history[t].value(P(0), b) == pytest.approx(exact, abs=1e-6)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            value_iteration(instance(complete_graph(3)), 0.0)
        with pytest.raises(ValueError):
            value_iteration(instance(complete_graph(3)), 1e-3, stopping="never")

    def test_value_at_unknown_position(self, k3_solved):
        with pytest.raises(KeyError):
            value_at(k3_solved, P(0, 1), np.array([0, 0, 1.0]))


def test_write_trace(k3_solved, tmp_path):
    path = tmp_path / "trace.txt"
    write_trace(k3_solved, 0.9, path)
    lines = path.read_text().splitlines()
    assert len(lines) == k3_solved.iterations
    t, res, bound, ms = lines[0].split()
    assert int(t) == 1 and float(res) == k3_solved.residuals[0]
    assert float(bound) == pytest.approx(0.9) and float(ms) >= 0
