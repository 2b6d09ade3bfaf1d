"""Tabular solvers for sequential care decisions: MDPs, constrained MDPs and
belief filtering for POMDPs."""

from .cmdp import (
    CMDPSolution,
    PolicyMixture,
    TabularCMDP,
    discounted_consumption,
    minimum_consumption,
    solve_cmdp_lagrangian,
)
from .mdp import TabularMDP, ValueIterationResult, policy_evaluation, value_iteration
from .pomdp import Belief, TabularPOMDP, belief_update, test_information_value
from .textfmt import format_problem, load_problem, parse_problem

__all__ = [
    "Belief",
    "CMDPSolution",
    "PolicyMixture",
    "TabularCMDP",
    "TabularMDP",
    "TabularPOMDP",
    "ValueIterationResult",
    "belief_update",
    "discounted_consumption",
    "format_problem",
    "load_problem",
    "minimum_consumption",
    "parse_problem",
    "policy_evaluation",
    "solve_cmdp_lagrangian",
    "test_information_value",
    "value_iteration",
]
