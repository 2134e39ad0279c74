"""Discrete pursuit-evasion on graphs with a pursuer who only holds a belief
over the evader's vertex, solved by value iteration over alpha-vector sets."""

from .alpha import EnvelopeConfig, ValueFunction, max_norm_distance, prune
from .backup import BackupConfig, apply_H, construct_value_function, q_function
from .efg import build_efg, oracle_value, solve_sequence_form
from .game import (
    DegenerateBeliefError,
    EvaderCaught,
    EvaderStageStrategy,
    GameInstance,
    Graph,
    PursuerPosition,
    complete_graph,
    condition_not_caught,
    cycle_graph,
    make_belief,
    path_graph,
    transform_belief,
    uniform_off,
)
from .lp import LinearProgram, LpSolution, Status, solve
from .simulate import HEURISTIC_EVADERS, RolloutConfig, rollout
from .solver import SolveReport, horizon_zero, value_at, value_iteration, write_trace
from .stage import solve_stage, solve_stage_evader, solve_stage_pursuer, stage_value_at

__version__ = "0.1.0"
