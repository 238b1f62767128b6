"""Normalized k-cuts through random-walk expander decompositions and hierarchy trees."""
from .decomp import DecompConfig, Decomposition, decompose_practical, decompose_theoretical, decompose_with_auto_gamma
from .graph import (
    Graph,
    GraphFormatError,
    Partition,
    border,
    conductance_cut,
    connected_components,
    induced_with_self_loops,
    load_graph,
    normalized_cut_value,
    volume,
)
from .hierarchy import LevelGraph, TreeSparsifier, build_hierarchy, contract, tree_stats
from .solver import TreeSolution, assign_clusters, dp_cut, greedy_cut, refine, solve_ncut, tree_objective
from .walk import CutOutcome, WalkConfig, cut_procedure, sweep_cut, two_ended_sweep

__all__ = [
    "CutOutcome", "DecompConfig", "Decomposition", "Graph", "GraphFormatError", "LevelGraph",
    "Partition", "TreeSolution", "TreeSparsifier", "WalkConfig", "assign_clusters", "border",
    "build_hierarchy", "conductance_cut", "connected_components", "contract", "cut_procedure",
    "decompose_practical", "decompose_theoretical", "decompose_with_auto_gamma", "dp_cut",
    "greedy_cut", "induced_with_self_loops", "load_graph", "normalized_cut_value", "refine",
    "solve_ncut", "sweep_cut", "tree_objective", "tree_stats", "two_ended_sweep", "volume",
]
