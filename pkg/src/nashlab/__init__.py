"""Optimistic Nash Q-learning lab for two-player turn-based stochastic games."""

from .game import (
    DiscountedGameSpec, EpisodicGameSpec, LinearGameSpec, g_disc, g_one,
    generate_random_episodic, lift_tabular_to_linear, validate,
)
from .solver import NashSolution, PolicyPair, solve_discounted, solve_episodic

__all__ = [
    "DiscountedGameSpec", "EpisodicGameSpec", "LinearGameSpec", "NashSolution", "PolicyPair",
    "g_disc", "g_one", "generate_random_episodic", "lift_tabular_to_linear",
    "solve_discounted", "solve_episodic", "validate",
]
