"""Hyperparameter tuning for Ising-machine style QUBO solvers."""

from .annealer import SolveBudget, SolveReport, SolverParams, solve
from .problems import encode_qap, encode_tsp, parse_qaplib, parse_tsplib
from .qubo import Bqp, energy, is_feasible, penalty_energy

__version__ = "0.1.0"

__all__ = [
    "Bqp",
    "SolveBudget",
    "SolveReport",
    "SolverParams",
    "encode_qap",
    "encode_tsp",
    "energy",
    "is_feasible",
    "parse_qaplib",
    "parse_tsplib",
    "penalty_energy",
    "solve",
]
