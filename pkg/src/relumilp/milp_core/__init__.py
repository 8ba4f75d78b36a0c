"""Optimization substrate: model builder, simplex, branch-and-bound, LP export."""
from .branch_bound import brute_force_milp, probe_variable, solve_milp
from .lp_io import export_lp_text, parse_lp_file, parse_lp_text, write_lp_file
from .model import (
    EQ,
    GE,
    INF,
    LE,
    CompiledModel,
    Model,
    SolveResult,
    SolveStats,
    SolverConfig,
    Status,
    check_solution,
    objective_value,
)
from .simplex import solve_lp

__all__ = [
    "EQ",
    "GE",
    "INF",
    "LE",
    "CompiledModel",
    "Model",
    "SolveResult",
    "SolveStats",
    "SolverConfig",
    "Status",
    "brute_force_milp",
    "check_solution",
    "export_lp_text",
    "objective_value",
    "parse_lp_file",
    "parse_lp_text",
    "probe_variable",
    "solve_lp",
    "solve_milp",
    "write_lp_file",
]
