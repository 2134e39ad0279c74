"""Exact finite-horizon solution through the explicit extensive-form game.

The tree starts with a chance move placing the evader, then alternates a
pursuer move and an evader move per round. The pursuer only observes his own
moves; the evader observes everything except the pursuer's move of the
current round. Isomorphic subtrees are deliberately kept apart, and the game
is solved with the sequence-form linear program, so nothing here relies on the
belief-space recursion it is used to check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .game import GameInstance, Graph, PursuerPosition, expand_pursuer_moves, make_belief
from .lp import LinearProgram, LpError, solve

DEFAULT_NODE_CAP = 1_000_000


class TreeTooLarge(RuntimeError):
    pass


@dataclass
class InfoSet:
    owner: str
    key: tuple
    parent_seq: int
    # sequence index for each available action, in action order
    actions: dict = field(default_factory=dict)
    members: int = 0


@dataclass
class ExtensiveFormGame:
    """Sequence-form view of the tree.

    Sequence 0 of each player is the empty sequence. Leaves are stored as
    ``(pursuer seq, evader seq, evader start, utility)`` so the chance
    probabilities can be re-weighted without rebuilding the tree.
    """

    n_vertices: int
    horizon: int
    gamma: float
    start: PursuerPosition
    chance_support: tuple[int, ...]
    pursuer_infosets: list[InfoSet]
    evader_infosets: list[InfoSet]
    n_pursuer_seqs: int
    n_evader_seqs: int
    leaves: list[tuple[int, int, int, float]]
    n_nodes: int
    belief: np.ndarray

    def payoff(self, belief: np.ndarray | None = None) -> dict[tuple[int, int], float]:
        b = self.belief if belief is None else np.asarray(belief, dtype=float)
        extra = set(np.flatnonzero(b > 0)) - set(self.chance_support)
        if extra:
            raise ValueError(f"belief puts mass on starts {sorted(extra)} missing from the tree")
        out: dict[tuple[int, int], float] = {}
        for sp, se, s0, u in self.leaves:
            if u != 0.0 and b[s0] > 0.0:
                out[(sp, se)] = out.get((sp, se), 0.0) + b[s0] * u
        return out


def build_efg(
    graph: Graph,
    start: PursuerPosition,
    gamma: float,
    t: int,
    belief: np.ndarray,
    node_cap: int = DEFAULT_NODE_CAP,
) -> ExtensiveFormGame:
    if t < 1:
        raise ValueError("horizon must be at least 1")
    belief = make_belief(belief)
    n = graph.n_vertices
    support = tuple(int(v) for v in np.flatnonzero(belief > 0))

    p_infosets: list[InfoSet] = []
    p_index: dict[tuple, int] = {}
    e_infosets: list[InfoSet] = []
    leaves: list[tuple[int, int, int, float]] = []
    counts = {"p": 1, "e": 1, "nodes": 1}

    def bump():
        counts["nodes"] += 1
        if counts["nodes"] > node_cap:
            raise TreeTooLarge(f"extensive-form tree exceeds {node_cap} nodes")

    def pursuer_infoset(seq_key: tuple, parent_seq: int, pos: PursuerPosition) -> InfoSet:
        if seq_key not in p_index:
            info = InfoSet("pursuer", seq_key, parent_seq)
            for succ in expand_pursuer_moves(graph, pos):
                info.actions[succ] = counts["p"]
                counts["p"] += 1
            p_index[seq_key] = len(p_infosets)
            p_infosets.append(info)
        info = p_infosets[p_index[seq_key]]
        info.members += 1
        return info

    def expand(s0, tau, pos, s_e, p_seq_key, p_seq, e_seq, history):
        # pursuer to move at history ``history``
        bump()
        p_info = pursuer_infoset(p_seq_key, p_seq, pos)
        e_info = InfoSet("evader", history, e_seq)
        for s_e_next in graph.adj(s_e):
            e_info.actions[s_e_next] = counts["e"]
            counts["e"] += 1
        e_infosets.append(e_info)
        for succ, sp_idx in p_info.actions.items():
            bump()
            e_info.members += 1
            for s_e_next, se_idx in e_info.actions.items():
                bump()
                if s_e_next in succ:
                    leaves.append((sp_idx, se_idx, s0, gamma ** (tau + 1)))
                elif tau + 1 == t:
                    leaves.append((sp_idx, se_idx, s0, 0.0))
                else:
                    expand(
                        s0,
                        tau + 1,
                        succ,
                        s_e_next,
                        p_seq_key + (succ,),
                        sp_idx,
                        se_idx,
                        history + (succ, s_e_next),
                    )

    for s0 in support:
        bump()
        if s0 in start:
            leaves.append((0, 0, s0, 1.0))
            continue
        expand(s0, 0, start, s0, (), 0, 0, (s0,))

    return ExtensiveFormGame(
        n_vertices=n,
        horizon=t,
        gamma=gamma,
        start=start,
        chance_support=support,
        pursuer_infosets=p_infosets,
        evader_infosets=e_infosets,
        n_pursuer_seqs=counts["p"],
        n_evader_seqs=counts["e"],
        leaves=leaves,
        n_nodes=counts["nodes"],
        belief=belief,
    )


def solve_sequence_form(
    efg: ExtensiveFormGame, belief: np.ndarray | None = None, engine: str = "highs"
) -> tuple[float, np.ndarray]:
    """Game value and an optimal pursuer realization plan.

    Pursuer plan ``r`` and one value variable per evader information set plus
    the root: maximize the root value subject to, for every evader sequence,
    the value of its parent set minus the values of its child sets being at most
    the payoff the sequence collects against ``r``.
    """
    payoff = efg.payoff(belief)
    n_p = efg.n_pursuer_seqs
    n_e = efg.n_evader_seqs
    n_y = 1 + len(efg.evader_infosets)
    n_vars = n_p + n_y

    A = np.zeros((n_e + 1 + len(efg.pursuer_infosets), n_vars))
    senses = ["<="] * n_e
    rhs = [0.0] * n_e
    # evader sequence rows: y_parent - sum y_children - payoff(r) <= 0
    A[0, n_p] = 1.0
    for j, info in enumerate(efg.evader_infosets):
        col = n_p + 1 + j
        A[info.parent_seq, col] -= 1.0
        for se in info.actions.values():
            A[se, col] += 1.0
    for (sp, se), val in payoff.items():
        A[se, sp] -= val
    # pursuer realization constraints
    row = n_e
    A[row, 0] = 1.0
    senses.append("=")
    rhs.append(1.0)
    for info in efg.pursuer_infosets:
        row += 1
        A[row, info.parent_seq] = -1.0
        for sp in info.actions.values():
            A[row, sp] = 1.0
        senses.append("=")
        rhs.append(0.0)

    c = np.zeros(n_vars)
    c[n_p] = 1.0
    lower = np.zeros(n_vars)
    lower[n_p:] = -np.inf
    sol = solve(LinearProgram(c, A, senses, rhs, maximize=True, lower=lower), engine=engine)
    if not sol.optimal:
        raise LpError(f"sequence-form LP ended {sol.status.value}")
    return sol.objective, np.clip(sol.x[:n_p], 0.0, None)


def plan_value(efg: ExtensiveFormGame, plan: np.ndarray, belief: np.ndarray | None = None) -> float:
    """Pursuer payoff of a fixed realization plan against a best-responding evader."""
    payoff = efg.payoff(belief)
    seq_payoff = np.zeros(efg.n_evader_seqs)
    for (sp, se), val in payoff.items():
        seq_payoff[se] += val * plan[sp]
    children: dict[int, list[InfoSet]] = {}
    for info in efg.evader_infosets:
        children.setdefault(info.parent_seq, []).append(info)

    def seq_value(se: int) -> float:
        total = seq_payoff[se]
        for info in children.get(se, []):
            total += min(seq_value(a) for a in info.actions.values())
        return total

    return seq_value(0)


def oracle_value(
    instance_or_graph: GameInstance | Graph,
    t: int,
    belief: np.ndarray,
    start: PursuerPosition | None = None,
    gamma: float | None = None,
    engine: str = "highs",
) -> float:
    """Exact horizon-``t`` value at ``belief``."""
    if isinstance(instance_or_graph, GameInstance):
        graph = instance_or_graph.graph
        start = instance_or_graph.initial_position if start is None else start
        gamma = instance_or_graph.gamma if gamma is None else gamma
    else:
        graph = instance_or_graph
    if start is None or gamma is None:
        raise ValueError("need a start position and a discount")
    efg = build_efg(graph, start, gamma, t, belief)
    return solve_sequence_form(efg, engine=engine)[0]
