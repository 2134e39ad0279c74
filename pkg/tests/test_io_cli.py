import numpy as np
import pytest

from pegame.cli import EPS_HELP, build_parser, main
from pegame.game import PursuerPosition
from pegame.io import (
    InstanceError,
    SolutionError,
    format_solution,
    instance_digest,
    load_solution,
    parse_instance,
    parse_solution,
    write_solution,
)
from pegame.solver import value_iteration

P = PursuerPosition.of

K3_YAML = """\
vertices: 3
edges: [[0, 1], [1, 2], [0, 2]]
self_loops: [0, 1, 2]
n_units: 1
gamma: 0.9
pursuer_start: [0]
belief: uniform_off
"""

RANDOM4_YAML = """\
vertices: 4
edges: [[0, 1], [0, 3], [2, 3]]
self_loops: [0, 1, 2, 3]
n_units: 1
gamma: 0.9
pursuer_start: [0]
belief: [0.1, 0.2, 0.3, 0.4]
"""


@pytest.fixture
def k3_file(tmp_path):
    path = tmp_path / "k3.yaml"
    path.write_text(K3_YAML)
    return path


class TestInstanceParsing:
    def test_k3(self):
        inst = parse_instance(K3_YAML)
        assert inst.graph.adjacency == ((0, 1, 2),) * 3
        assert inst.initial_position == P(0) and np.allclose(inst.initial_belief, [0, 0.5, 0.5])

    def test_directed(self):
        inst = parse_instance(K3_YAML.replace("vertices: 3", "vertices: 3\ndirected: true"))
        assert inst.graph.adj(1) == (1, 2)

    @pytest.mark.parametrize(
        "old, new, where",
        [
            ("gamma: 0.9", "gamma: 1.5", "line 5"),
            ("pursuer_start: [0]", "pursuer_start: [0, 1]", "line 6"),
            ("belief: uniform_off", "belief: [0.5, 0.5]", "line 7"),
            ("n_units: 1", "n_units: one", "line 4"),
            ("vertices: 3", "vertices: 3\ncolour: red", "line 2"),
        ],
    )
    def test_diagnostics_name_the_line(self, old, new, where):
        with pytest.raises(InstanceError, match=where):
            parse_instance(K3_YAML.replace(old, new))

    def test_syntax_error_has_position(self):
        with pytest.raises(InstanceError, match="line 2, column 16"):
            parse_instance("vertices: 3\nedges: [[0, 1]]]\ngamma: 0.9\n")

    def test_missing_key(self):
        with pytest.raises(InstanceError, match="missing key 'gamma'"):
            parse_instance(K3_YAML.replace("gamma: 0.9\n", ""))


class TestSolutionFile:
    def test_round_trip(self):
        inst = parse_instance(K3_YAML)
        rep = value_iteration(inst, 1e-2)
        sol = parse_solution(format_solution(inst, rep))
        assert sol.iterations == rep.iterations and sol.converged
        assert instance_digest(sol.instance) == instance_digest(inst)
        for pos in rep.final:
            assert np.array_equal(sol.value_function[pos], rep.final[pos])

    def test_digest_mismatch_refused(self, tmp_path):
        inst = parse_instance(K3_YAML)
        path = tmp_path / "k3.solution"
        write_solution(path, inst, value_iteration(inst, 1e-2))
        path.write_text(path.read_text().replace('"gamma":"0.9"', '"gamma":"0.8"'))
        with pytest.raises(SolutionError, match="digest mismatch"):
            load_solution(path)

    def test_not_a_solution(self):
        with pytest.raises(SolutionError):
            parse_solution("hello\n")


class TestCli:
    def test_help_documents_eps(self, capsys):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["solve", "--help"])
        out = " ".join(capsys.readouterr().out.split())
        assert EPS_HELP in out

    def test_solve_value_simulate(self, k3_file, tmp_path, capsys):
        out = tmp_path / "k3.solution"
        assert main(["solve", str(k3_file), "--eps", "1e-3", "--out", str(out)]) == 0
        trace = out.with_suffix(".trace").read_text().splitlines()
        assert f"iterations {len(trace)}" in capsys.readouterr().out
        assert all(len(line.split()) == 4 for line in trace)
        assert main(["value", str(out)]) == 0
        assert float(capsys.readouterr().out) == pytest.approx(0.75, abs=1e-3)
        assert main(["value", str(out), "--position", "1", "--belief", "0,1,0"]) == 0
        assert float(capsys.readouterr().out) == 1.0
        assert main(["simulate", str(out), "--episodes", "2000", "--seed", "1"]) == 0
        assert "mean" in capsys.readouterr().out

    def test_eps_one_is_a_single_iteration(self, k3_file, tmp_path, capsys):
        out = tmp_path / "one.solution"
        assert main(["solve", str(k3_file), "--eps", "1", "--out", str(out)]) == 0
        assert "iterations 1" in capsys.readouterr().out
        assert load_solution(out).value(P(0), np.array([0, 0.5, 0.5])) == pytest.approx(0.3)

    def test_non_converged_exit_code(self, k3_file, tmp_path):
        assert main(["solve", str(k3_file), "--eps", "1e-9", "--max-iters", "2", "--out", str(tmp_path / "x")]) == 2

    def test_malformed_belief_length(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text(K3_YAML.replace("belief: uniform_off", "belief: [0.5, 0.5]"))
        assert main(["solve", str(path)]) == 1

    def test_missing_file(self, tmp_path):
        assert main(["solve", str(tmp_path / "nope.yaml")]) == 1

    def test_value_rejects_bad_belief(self, k3_file, tmp_path):
        out = tmp_path / "k3.solution"
        main(["solve", str(k3_file), "--eps", "1e-1", "--out", str(out)])
        assert main(["value", str(out), "--belief", "0.5,0.5"]) == 1
        assert main(["value", str(out), "--position", "0,1"]) == 1

    def test_oracle_check(self, k3_file, tmp_path, capsys):
        assert main(["oracle-check", str(k3_file), "--t", "1"]) == 0
        assert main(["oracle-check", str(k3_file), "--t", "0"]) == 1
        path = tmp_path / "r4.yaml"
        path.write_text(RANDOM4_YAML)
        assert main(["oracle-check", str(path), "--t", "2", "--samples", "64", "--seed", "3"]) == 0
        assert "max |DP - EFG|" in capsys.readouterr().out

    def test_deterministic_output(self, k3_file, tmp_path):
        a, b = tmp_path / "a.solution", tmp_path / "b.solution"
        main(["solve", str(k3_file), "--eps", "1e-2", "--out", str(a)])
        main(["solve", str(k3_file), "--eps", "1e-2", "--out", str(b)])
        assert a.read_text() == b.read_text()
