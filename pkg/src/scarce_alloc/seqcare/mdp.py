"""Tabular discounted MDPs: value iteration and policy evaluation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..errors import NonConvergenceError, ValidationError

ROW_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class TabularMDP:
    """``transition[s, a, s2] = T(s2 | s, a)``, ``reward[s, a] = R(s, a)``."""

    transition: np.ndarray
    reward: np.ndarray
    discount: float

    def __post_init__(self):
        T = np.array(self.transition, dtype=float)
        R = np.array(self.reward, dtype=float)
        if T.ndim != 3 or T.shape[0] != T.shape[2]:
            raise ValidationError("transition must have shape (states, actions, states)")
        if R.shape != T.shape[:2]:
            raise ValidationError(f"reward must have shape {T.shape[:2]}, got {R.shape}")
        if np.any(T < 0) or np.any(np.abs(T.sum(axis=2) - 1.0) > ROW_TOL):
            bad = np.argwhere(np.abs(T.sum(axis=2) - 1.0) > ROW_TOL)
            where = f" (state {bad[0][0]}, action {bad[0][1]})" if len(bad) else ""
            raise ValidationError(f"transition rows must be probability vectors{where}")
        if not np.all(np.isfinite(R)):
            raise ValidationError("reward must be finite")
        if not 0.0 < self.discount < 1.0:
            raise ValidationError(f"discount must lie in (0, 1), got {self.discount}")
        T.setflags(write=False)
        R.setflags(write=False)
        object.__setattr__(self, "transition", T)
        object.__setattr__(self, "reward", R)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    def with_reward(self, reward) -> "TabularMDP":
        return TabularMDP(self.transition, reward, self.discount)

    def q_values(self, values) -> np.ndarray:
        return self.reward + self.discount * (self.transition @ values)


class ValueIterationResult(NamedTuple):
    values: np.ndarray
    policy: np.ndarray
    residuals: list


def _stop_threshold(tolerance: float, discount: float) -> float:
    # ||V_{k+1} - V_k|| <= tol (1 - g) / (2 g) guarantees ||V - V*|| <= tol.
    return tolerance * (1.0 - discount) / (2.0 * discount)


def value_iteration(mdp: TabularMDP, tolerance: float = 1e-9, max_iters: int = 100_000,
                    initial=None) -> ValueIterationResult:
    """Bellman-optimal values and the greedy deterministic policy.

    Policy ties go to the lowest action index.
    """
    if tolerance <= 0:
        raise ValidationError("tolerance must be > 0")
    stop = _stop_threshold(tolerance, mdp.discount)
    values = np.zeros(mdp.n_states) if initial is None else np.array(initial, dtype=float)
    residuals = []
    for _ in range(max_iters):
        updated = mdp.q_values(values).max(axis=1)
        residual = float(np.max(np.abs(updated - values))) if mdp.n_states else 0.0
        residuals.append(residual)
        values = updated
        if residual <= stop:
            break
    else:
        raise NonConvergenceError(
            f"value iteration did not converge in {max_iters} iterations", residuals[-1]
        )
    policy = np.argmax(mdp.q_values(values), axis=1)
    return ValueIterationResult(values, policy, residuals)


def policy_matrix(policy, n_states: int, n_actions: int) -> np.ndarray:
    """Deterministic ``(S,)`` action vector or stochastic ``(S, A)`` table, as ``(S, A)``."""
    policy = np.asarray(policy)
    if policy.ndim == 1:
        if policy.shape != (n_states,):
            raise ValidationError(f"policy must assign an action to each of {n_states} states")
        if not np.issubdtype(policy.dtype, np.integer) and not np.all(policy == np.round(policy)):
            raise ValidationError("deterministic policy must hold integer actions")
        actions = policy.astype(int)
        if np.any(actions < 0) or np.any(actions >= n_actions):
            raise ValidationError("policy refers to an invalid action")
        table = np.zeros((n_states, n_actions))
        table[np.arange(n_states), actions] = 1.0
        return table
    table = policy.astype(float)
    if table.shape != (n_states, n_actions):
        raise ValidationError(f"stochastic policy must have shape {(n_states, n_actions)}")
    if np.any(table < 0) or np.any(np.abs(table.sum(axis=1) - 1.0) > 1e-9):
        raise ValidationError("stochastic policy rows must be probability vectors")
    return table


def policy_evaluation(mdp: TabularMDP, policy, tolerance: float = 1e-9, max_iters: int = 100_000,
                      reward=None) -> np.ndarray:
    """Iterate the fixed-policy Bellman operator to its fixed point.

    ``reward`` replaces ``mdp.reward`` (used to evaluate resource consumption).
    """
    if tolerance <= 0:
        raise ValidationError("tolerance must be > 0")
    pi = policy_matrix(policy, mdp.n_states, mdp.n_actions)
    R = mdp.reward if reward is None else np.asarray(reward, dtype=float)
    if R.shape != mdp.reward.shape:
        raise ValidationError("reward override has the wrong shape")
    r_pi = (pi * R).sum(axis=1)
    p_pi = np.einsum("sa,sat->st", pi, mdp.transition)
    stop = _stop_threshold(tolerance, mdp.discount)
    values = np.zeros(mdp.n_states)
    for _ in range(max_iters):
        updated = r_pi + mdp.discount * (p_pi @ values)
        residual = float(np.max(np.abs(updated - values))) if mdp.n_states else 0.0
        values = updated
        if residual <= stop:
            return values
    raise NonConvergenceError(f"policy evaluation did not converge in {max_iters} iterations", residual)
