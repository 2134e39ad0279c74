"""Instance (YAML) and solution (line-oriented text) files."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .alpha import ValueFunction
from .game import GameInstance, Graph, PursuerPosition, make_belief, uniform_off
from .solver import SolveReport

SOLUTION_HEADER = "# pegame solution v1"


class InstanceError(ValueError):
    """Malformed instance file; the message carries line and column."""


class SolutionError(ValueError):
    """Malformed or tampered solution file."""


def _where(node: yaml.Node | None) -> str:
    if node is None:
        return "line 1, column 1"
    mark = node.start_mark
    return f"line {mark.line + 1}, column {mark.column + 1}"


def parse_instance(text: str, source: str = "<instance>") -> GameInstance:
    """Parse an instance document.

    Keys: ``vertices``, ``edges``, ``directed`` (default false), ``self_loops``,
    ``n_units``, ``gamma``, ``pursuer_start`` and ``belief`` (a list of
    probabilities or ``uniform_off``).
    """
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        mark = getattr(err, "problem_mark", None)
        loc = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise InstanceError(f"{source}: {loc}: {getattr(err, 'problem', err)}") from None
    if not isinstance(data, dict):
        raise InstanceError(f"{source}: {_where(root)}: expected a mapping of keys")
    nodes = {}
    if isinstance(root, yaml.MappingNode):
        nodes = {k.value: v for k, v in root.value}

    def fail(key: str, msg: str):
        raise InstanceError(f"{source}: {_where(nodes.get(key, root))}: {key}: {msg}")

    allowed = {"vertices", "edges", "directed", "self_loops", "n_units", "gamma", "pursuer_start", "belief"}
    for key in data:
        if key not in allowed:
            fail(key, "unknown key")
    for key in ("vertices", "edges", "n_units", "gamma", "pursuer_start", "belief"):
        if key not in data:
            raise InstanceError(f"{source}: {_where(root)}: missing key {key!r}")

    n = data["vertices"]
    if not isinstance(n, int) or isinstance(n, bool) or n <= 0:
        fail("vertices", "must be a positive integer")
    edges = data["edges"] or []
    if not isinstance(edges, list) or not all(
        isinstance(e, list) and len(e) == 2 and all(isinstance(x, int) for x in e) for e in edges
    ):
        fail("edges", "must be a list of [u, v] integer pairs")
    directed = data.get("directed", False)
    if not isinstance(directed, bool):
        fail("directed", "must be true or false")
    loops = data.get("self_loops", []) or []
    if not isinstance(loops, list) or not all(isinstance(x, int) for x in loops):
        fail("self_loops", "must be a list of vertices")
    try:
        graph = Graph.from_edges(n, edges, directed=directed, self_loops=loops)
    except ValueError as err:
        fail("edges", str(err))

    n_units = data["n_units"]
    if not isinstance(n_units, int) or isinstance(n_units, bool) or n_units < 1:
        fail("n_units", "must be a positive integer")
    gamma = data["gamma"]
    if not isinstance(gamma, (int, float)) or isinstance(gamma, bool) or not 0 <= gamma < 1:
        fail("gamma", "must be a number in [0, 1)")
    start = data["pursuer_start"]
    if not isinstance(start, list) or not all(isinstance(x, int) for x in start):
        fail("pursuer_start", "must be a list of vertices")
    if len(start) != n_units:
        fail("pursuer_start", f"has {len(start)} vertices but n_units is {n_units}")
    if any(not 0 <= v < n for v in start):
        fail("pursuer_start", "vertex out of range")
    pos = PursuerPosition(tuple(start))

    belief = data["belief"]
    try:
        if belief == "uniform_off":
            b = uniform_off(n, pos)
        elif isinstance(belief, list) and all(isinstance(x, (int, float)) for x in belief):
            if len(belief) != n:
                fail("belief", f"has {len(belief)} entries, expected {n}")
            b = make_belief(belief)
        else:
            fail("belief", "must be a list of probabilities or 'uniform_off'")
    except ValueError as err:
        if isinstance(err, InstanceError):
            raise
        fail("belief", str(err))
    return GameInstance(graph, n_units, float(gamma), pos, b)


def load_instance(path: str | Path) -> GameInstance:
    path = Path(path)
    return parse_instance(path.read_text(), str(path))


def canonical_instance(instance: GameInstance) -> str:
    """One-line JSON form of an instance; its hash identifies the instance."""
    doc = {
        "adjacency": [list(a) for a in instance.graph.adjacency],
        "n_units": instance.n_units,
        "gamma": repr(float(instance.gamma)),
        "pursuer_start": list(instance.initial_position.vertices),
        "belief": [repr(float(x)) for x in instance.initial_belief],
    }
    return json.dumps(doc, separators=(",", ":"), sort_keys=True)


def instance_from_canonical(text: str) -> GameInstance:
    doc = json.loads(text)
    graph = Graph(tuple(tuple(a) for a in doc["adjacency"]))
    return GameInstance(
        graph,
        doc["n_units"],
        float(doc["gamma"]),
        PursuerPosition(tuple(doc["pursuer_start"])),
        np.array([float(x) for x in doc["belief"]]),
    )


def instance_digest(instance: GameInstance) -> str:
    return "sha256:" + hashlib.sha256(canonical_instance(instance).encode()).hexdigest()


@dataclass
class Solution:
    instance: GameInstance
    gamma: float
    iterations: int
    residual: float
    bound: float
    converged: bool
    value_function: ValueFunction

    def value(self, position: PursuerPosition, belief: np.ndarray) -> float:
        return self.value_function.value(position, belief)


def format_solution(instance: GameInstance, report: SolveReport) -> str:
    lines = [
        SOLUTION_HEADER,
        f"digest {instance_digest(instance)}",
        f"instance {canonical_instance(instance)}",
        f"gamma {instance.gamma:.17g}",
        f"iterations {report.iterations}",
        f"residual {report.residual:.17g}",
        f"bound {report.bound:.17g}",
        f"converged {'true' if report.converged else 'false'}",
    ]
    for pos in report.final:
        lines.append(f"position {pos}")
        for alpha in report.final[pos]:
            lines.append("alpha " + " ".join(f"{x:.17g}" for x in alpha))
    return "\n".join(lines) + "\n"


def write_solution(path: str | Path, instance: GameInstance, report: SolveReport) -> None:
    Path(path).write_text(format_solution(instance, report))


def parse_solution(text: str, source: str = "<solution>") -> Solution:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != SOLUTION_HEADER:
        raise SolutionError(f"{source}: not a solution file")
    header: dict[str, str] = {}
    sets: dict[PursuerPosition, list[list[float]]] = {}
    current = None
    for lineno, line in enumerate(lines[1:], start=2):
        key, _, rest = line.partition(" ")
        if key == "position":
            current = PursuerPosition.parse(rest)
            sets[current] = []
        elif key == "alpha":
            if current is None:
                raise SolutionError(f"{source}: line {lineno}: alpha before any position")
            sets[current].append([float(x) for x in rest.split()])
        else:
            header[key] = rest
    for key in ("digest", "instance", "gamma", "iterations", "residual", "bound", "converged"):
        if key not in header:
            raise SolutionError(f"{source}: missing {key!r}")
    instance = instance_from_canonical(header["instance"])
    if instance_digest(instance) != header["digest"]:
        raise SolutionError(f"{source}: instance digest mismatch; refusing to use this solution")
    return Solution(
        instance=instance,
        gamma=float(header["gamma"]),
        iterations=int(header["iterations"]),
        residual=float(header["residual"]),
        bound=float(header["bound"]),
        converged=header["converged"] == "true",
        value_function=ValueFunction({p: np.array(a) for p, a in sets.items()}),
    )


def load_solution(path: str | Path) -> Solution:
    path = Path(path)
    return parse_solution(path.read_text(), str(path))
