"""Adversarial bandits where playing an action also reveals the rewards of its graph neighbours."""
from .graph import (
    FeedbackGraph,
    GraphSequence,
    clique_partition_greedy,
    erdos_renyi,
    fixture,
    from_edge_list,
    greedy_independent_set,
    independence_number_exact,
    read_graph,
)
from .lp import ExplorationDistribution, independent_set_witness, solve_max_min_exploration
from .policies import Elp, Exp3Policy, ExpBan, MetaElp, build_policy, elp_tune_beta
from .sim import RunConfig, run_all, run_monte_carlo

__version__ = "0.1.0"

__all__ = [
    "FeedbackGraph", "GraphSequence", "clique_partition_greedy", "erdos_renyi", "fixture",
    "from_edge_list", "greedy_independent_set", "independence_number_exact", "read_graph",
    "ExplorationDistribution", "independent_set_witness", "solve_max_min_exploration",
    "Elp", "Exp3Policy", "ExpBan", "MetaElp", "build_policy", "elp_tune_beta",
    "RunConfig", "run_all", "run_monte_carlo",
]
