"""Constrained MDPs solved by Lagrangian dual ascent.

For multipliers ``mu >= 0`` the inner problem is an ordinary MDP with reward
``R - sum_j mu_j g_j``, solved by value iteration. The multipliers follow
projected subgradient steps ``mu_j <- max(0, mu_j + step_k (c_j - C_j))``.
Optimal constrained policies are generally randomized; the returned policy is
the time-average of the inner-loop deterministic policies, executed as a
mixture (one deterministic policy is drawn at time 0 with its weight).

The average is step-weighted over a tail window ``k0..K``. With step weights
the averaged constraint violation telescopes to at most
``(mu_final - mu_k0) / sum(steps)``, so ``k0`` is taken, within
``[average_from * K, (1 + average_from) / 2 * K]``, where ``mu`` is closest to
its final value. Skipping the warm-up keeps the large early violations out.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import InfeasibleError, ValidationError
from .mdp import TabularMDP, policy_evaluation, value_iteration


@dataclass(frozen=True, eq=False)
class TabularCMDP:
    base: TabularMDP
    consumptions: tuple
    budgets: np.ndarray

    def __post_init__(self):
        shape = self.base.reward.shape
        tables = tuple(np.array(g, dtype=float) for g in self.consumptions)
        budgets = np.array(self.budgets, dtype=float).reshape(-1)
        if len(tables) != len(budgets):
            raise ValidationError(f"{len(tables)} consumption tables but {len(budgets)} budgets")
        for j, g in enumerate(tables):
            if g.shape != shape:
                raise ValidationError(f"consumption {j} must have shape {shape}")
            if np.any(g < 0) or not np.all(np.isfinite(g)):
                raise ValidationError(f"consumption {j} must be finite and nonnegative")
        if np.any(budgets < 0) or np.any(np.isnan(budgets)):
            raise ValidationError("budgets must be nonnegative")
        object.__setattr__(self, "consumptions", tables)
        object.__setattr__(self, "budgets", budgets)

    @property
    def n_constraints(self) -> int:
        return len(self.consumptions)


def _start(mdp: TabularMDP, start_distribution) -> np.ndarray:
    if start_distribution is None:
        return np.full(mdp.n_states, 1.0 / mdp.n_states)
    start = np.asarray(start_distribution, dtype=float)
    if start.shape != (mdp.n_states,) or np.any(start < 0) or abs(start.sum() - 1.0) > 1e-9:
        raise ValidationError("start_distribution must be a probability vector over states")
    return start


@dataclass(frozen=True, eq=False)
class PolicyMixture:
    """Deterministic policies ``policies[k]`` drawn once with probability ``weights[k]``."""

    weights: np.ndarray
    policies: np.ndarray  # (K, S) actions

    def __len__(self):
        return len(self.weights)

    def evaluate(self, mdp: TabularMDP, start_distribution=None, reward=None, tolerance=1e-10) -> float:
        start = _start(mdp, start_distribution)
        return float(sum(
            w * (policy_evaluation(mdp, p, tolerance, reward=reward) @ start)
            for w, p in zip(self.weights, self.policies)
        ))

    def dominant(self) -> np.ndarray:
        """Highest-weight member: the deterministic projection."""
        return self.policies[int(np.argmax(self.weights))]


def discounted_consumption(cmdp: TabularCMDP, policy, j: int, start_distribution=None,
                           tolerance: float = 1e-10) -> float:
    """``E[sum_t gamma^t g_j(s_t, a_t)]`` from the start distribution."""
    if not 0 <= j < cmdp.n_constraints:
        raise ValidationError(f"resource index {j} out of range")
    if isinstance(policy, PolicyMixture):
        return policy.evaluate(cmdp.base, start_distribution, cmdp.consumptions[j], tolerance)
    start = _start(cmdp.base, start_distribution)
    return float(policy_evaluation(cmdp.base, policy, tolerance, reward=cmdp.consumptions[j]) @ start)


def minimum_consumption(cmdp: TabularCMDP, j: int, start_distribution=None, tolerance=1e-10) -> float:
    start = _start(cmdp.base, start_distribution)
    result = value_iteration(cmdp.base.with_reward(-cmdp.consumptions[j]), tolerance)
    return float(-(result.values @ start))


def default_step_schedule(k: int) -> float:
    return 1.0 / np.sqrt(k)


@dataclass(frozen=True, eq=False)
class CMDPSolution:
    mixture: PolicyMixture
    multipliers: np.ndarray
    value: float
    consumptions: np.ndarray
    feasible: bool
    dual_bound: float
    duality_gap: float
    multiplier_history: np.ndarray = field(repr=False)
    consumption_history: np.ndarray = field(repr=False)


def solve_cmdp_lagrangian(
    cmdp: TabularCMDP,
    start_distribution=None,
    step_schedule: Callable[[int], float] = default_step_schedule,
    n_dual_iters: int = 2000,
    tolerance: float = 1e-3,
    vi_tolerance: float = 1e-10,
    average_from: float = 0.5,
) -> CMDPSolution:
    if n_dual_iters < 1:
        raise ValidationError("n_dual_iters must be >= 1")
    if not 0.0 <= average_from < 1.0:
        raise ValidationError("average_from must lie in [0, 1)")
    mdp = cmdp.base
    start = _start(mdp, start_distribution)
    budgets = cmdp.budgets
    for j in range(cmdp.n_constraints):
        least = minimum_consumption(cmdp, j, start, vi_tolerance)
        if least > budgets[j] + tolerance:
            raise InfeasibleError(
                f"budget {budgets[j]} for resource {j} is below the minimum achievable consumption {least:.6g}"
            )

    G = np.stack(cmdp.consumptions) if cmdp.n_constraints else np.zeros((0,) + mdp.reward.shape)
    mu = np.zeros(cmdp.n_constraints)
    cache: dict[tuple, tuple[float, np.ndarray]] = {}
    mu_history, use_history, keys, steps = [], [], [], []
    best_dual = np.inf
    warm = None
    for k in range(1, n_dual_iters + 1):
        lagrangian = mdp.with_reward(mdp.reward - np.tensordot(mu, G, axes=1))
        inner = value_iteration(lagrangian, vi_tolerance, initial=warm)
        warm = inner.values
        best_dual = min(best_dual, float(inner.values @ start + mu @ budgets))
        key = tuple(int(a) for a in inner.policy)
        if key not in cache:
            value = float(policy_evaluation(mdp, inner.policy, vi_tolerance) @ start)
            used = np.array([
                policy_evaluation(mdp, inner.policy, vi_tolerance, reward=g) @ start for g in cmdp.consumptions
            ])
            cache[key] = (value, used)
        step = step_schedule(k)
        if not step > 0:
            raise ValidationError(f"step schedule returned non-positive step {step} at iteration {k}")
        used = cache[key][1]
        mu_history.append(mu.copy())
        use_history.append(used)
        keys.append(key)
        steps.append(step)
        mu = np.maximum(0.0, mu + step * (used - budgets))

    lo = int(average_from * n_dual_iters)
    hi = max(lo + 1, int(0.5 * (1.0 + average_from) * n_dual_iters))
    distance = [np.max(np.abs(mu - m), initial=0.0) for m in mu_history[lo:hi]]
    k0 = lo + int(np.argmin(distance))
    weight_of: "OrderedDict[tuple, float]" = OrderedDict()
    for key, step in zip(keys[k0:], steps[k0:]):
        weight_of[key] = weight_of.get(key, 0.0) + step

    weights = np.array(list(weight_of.values()), dtype=float)
    weights /= weights.sum()
    policies = np.array(list(weight_of.keys()), dtype=int).reshape(len(weight_of), mdp.n_states)
    mixture = PolicyMixture(weights, policies)
    value = float(sum(w * cache[p][0] for w, p in zip(weights, weight_of)))
    consumption = (
        np.sum([w * cache[p][1] for w, p in zip(weights, weight_of)], axis=0)
        if cmdp.n_constraints else np.zeros(0)
    )
    return CMDPSolution(
        mixture=mixture,
        multipliers=mu,
        value=value,
        consumptions=consumption,
        feasible=bool(np.all(consumption <= budgets + tolerance)),
        dual_bound=best_dual,
        duality_gap=best_dual - value,
        multiplier_history=np.array(mu_history),
        consumption_history=np.array(use_history),
    )
