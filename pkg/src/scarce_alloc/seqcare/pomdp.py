"""Belief filtering for tabular POMDPs and the value of a diagnostic test."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ImpossibleObservationError, ValidationError
from .mdp import ROW_TOL, TabularMDP


@dataclass(frozen=True, eq=False)
class Belief:
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > ROW_TOL:
            raise ValidationError("belief must be a probability vector")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def __len__(self):
        return len(self.probs)


@dataclass(frozen=True, eq=False)
class TabularPOMDP:
    """``observation[s2, a, o] = O(o | s2, a)``."""

    base: TabularMDP
    observation: np.ndarray

    def __post_init__(self):
        O = np.array(self.observation, dtype=float)
        S, A = self.base.n_states, self.base.n_actions
        if O.ndim != 3 or O.shape[:2] != (S, A):
            raise ValidationError(f"observation must have shape ({S}, {A}, n_observations)")
        if np.any(O < 0) or np.any(np.abs(O.sum(axis=2) - 1.0) > ROW_TOL):
            raise ValidationError("observation rows must be probability vectors")
        O.setflags(write=False)
        object.__setattr__(self, "observation", O)

    @property
    def n_observations(self) -> int:
        return self.observation.shape[2]


def _check_indices(pomdp: TabularPOMDP, action: int, observation: int | None = None):
    if not 0 <= action < pomdp.base.n_actions:
        raise ValidationError(f"invalid action {action}")
    if observation is not None and not 0 <= observation < pomdp.n_observations:
        raise ValidationError(f"invalid observation {observation}")


def predict_belief(pomdp: TabularPOMDP, belief: Belief, action: int) -> np.ndarray:
    _check_indices(pomdp, action)
    return belief.probs @ pomdp.base.transition[:, action, :]


def observation_probability(pomdp: TabularPOMDP, belief: Belief, action: int, observation: int) -> float:
    _check_indices(pomdp, action, observation)
    return float(predict_belief(pomdp, belief, action) @ pomdp.observation[:, action, observation])


def belief_update(pomdp: TabularPOMDP, belief: Belief, action: int, observation: int) -> Belief:
    """Bayes filter: ``b'(s2) ~ O(o | s2, a) * sum_s T(s2 | s, a) b(s)``."""
    if len(belief) != pomdp.base.n_states:
        raise ValidationError("belief dimension does not match the state space")
    _check_indices(pomdp, action, observation)
    unnormalised = predict_belief(pomdp, belief, action) * pomdp.observation[:, action, observation]
    total = unnormalised.sum()
    if total <= 0:
        raise ImpossibleObservationError(
            f"observation {observation} has zero probability after action {action}"
        )
    posterior = unnormalised / total
    # Renormalise once more so rounding cannot push the sum off 1.
    return Belief(posterior / posterior.sum())


def test_information_value(pomdp: TabularPOMDP, belief: Belief, test_action: int,
                           terminal_actions: Sequence[int], cost: float = 0.0) -> float:
    """Expected gain from testing before choosing a terminal action, net of ``cost``.

    Terminal payoffs are ``R(s, a)`` taken in the current state; the test is
    scored by enumerating its observations and acting optimally on each posterior.
    """
    _check_indices(pomdp, test_action)
    if not terminal_actions:
        raise ValidationError("need at least one terminal action")
    for a in terminal_actions:
        _check_indices(pomdp, a)
    payoff = pomdp.base.reward[:, list(terminal_actions)]

    def act_now(b: np.ndarray) -> float:
        return float((b @ payoff).max())

    informed = 0.0
    for o in range(pomdp.n_observations):
        p_o = observation_probability(pomdp, belief, test_action, o)
        if p_o > 0:
            informed += p_o * act_now(belief_update(pomdp, belief, test_action, o).probs)
    return informed - act_now(belief.probs) - cost


test_information_value.__test__ = False  # not a pytest test despite the name
