from .base import BaseSolver, SolveResult
from .atcsr import AtcsrRule, atcsr_index
from .exact import ExactSolver, ParetoPoint, SizeGuardError, pareto_enumerate, solve_exact_scalarized
from .ga import GeneticAlgorithm, crossover, decode, fitness, mutate, random_chromosome
from .policy import PolicyAgent
from .random_policy import RandomPolicy

__all__ = [
    "BaseSolver",
    "SolveResult",
    "AtcsrRule",
    "atcsr_index",
    "ExactSolver",
    "ParetoPoint",
    "SizeGuardError",
    "pareto_enumerate",
    "solve_exact_scalarized",
    "GeneticAlgorithm",
    "crossover",
    "decode",
    "fitness",
    "mutate",
    "random_chromosome",
    "PolicyAgent",
    "RandomPolicy",
]
