"""Decision-centric metrics: value of information and allocation efficiency."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import allocation as alloc_mod
from .allocation import POLICY_NAMES, UtilityKind, UtilityMatrix
from .errors import UndefinedMetricError, ValidationError
from .harness.config import ExperimentConfig
from .harness.runner import UtilitySummary, derive_seed, prepare_run, run_experiment

EVI_STREAM = 17


@dataclass(frozen=True, eq=False)
class DiscreteScenario:
    """Single decision under a discrete signal.

    ``action_utilities[a, x]`` is ``E[u(a) | x]``; ``prior_action_utilities``
    defaults to its signal-weighted average and is checked against it if given.
    """

    signal_probs: np.ndarray
    action_utilities: np.ndarray
    prior_action_utilities: np.ndarray | None = None

    def __post_init__(self):
        probs = np.asarray(self.signal_probs, dtype=float)
        table = np.atleast_2d(np.asarray(self.action_utilities, dtype=float))
        if probs.ndim != 1 or table.shape[1] != probs.shape[0]:
            raise ValidationError("action_utilities must be (actions x signals) matching signal_probs")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValidationError("signal_probs must be nonnegative and sum to 1")
        implied = table @ probs
        prior = implied if self.prior_action_utilities is None else np.asarray(
            self.prior_action_utilities, dtype=float)
        if prior.shape != implied.shape or np.any(np.abs(prior - implied) > 1e-9):
            raise ValidationError("prior_action_utilities must equal the signal-weighted average of u(a|x)")
        object.__setattr__(self, "signal_probs", probs)
        object.__setattr__(self, "action_utilities", table)
        object.__setattr__(self, "prior_action_utilities", prior)


def evi_discrete(scenario: DiscreteScenario) -> float:
    """``sum_x P(x) max_a u(a|x) - max_a E[u(a)]`` by enumeration.

    Both terms go through one row-wise reduction, so rounding cannot push the
    result below zero.
    """
    table = scenario.action_utilities
    rows = np.vstack([table, table.max(axis=0)]) * scenario.signal_probs
    expected = rows.sum(axis=1)
    return float(expected[-1] - expected[:-1].max())


@dataclass(frozen=True)
class EviEstimate:
    value: float
    stderr: float
    n_samples: int
    samples: np.ndarray = field(repr=False, compare=False, default=None)


def _uninformed_matrix(estimated: UtilityMatrix) -> UtilityMatrix:
    column_means = estimated.values.mean(axis=0, keepdims=True)
    return UtilityMatrix(np.broadcast_to(column_means, estimated.shape), UtilityKind.ESTIMATED)


def evi_allocation(config: ExperimentConfig, n_samples: int | None = None, seed: int | None = None,
                   perfect_information: bool = False) -> EviEstimate:
    """Monte Carlo value of patient-level information for the whole allocation.

    Per sampled cohort: true utility of the exact allocation on the estimated
    matrix, minus true utility of the exact allocation on a matrix where every
    patient carries the population-mean utility of each resource. The severity
    penalty is left out of both terms. With ``perfect_information`` the
    estimates are replaced by the true utilities.
    """
    n_samples = config.evi_samples if n_samples is None else n_samples
    if n_samples < 1:
        raise ValidationError("n_samples must be >= 1")
    root = config.root_seed if seed is None else seed
    resources = config.resources
    diffs = np.empty(n_samples)
    for k in range(n_samples):
        sample_config = config.replace(root_seed=derive_seed(root, EVI_STREAM, k) % (2**63))
        state = prepare_run(sample_config, 0)
        basis = state.true if perfect_information else state.estimated
        informed = alloc_mod.solve_exact(basis, resources, size_limit=None)
        uninformed = alloc_mod.solve_exact(_uninformed_matrix(basis), resources, size_limit=None)
        diffs[k] = informed.objective(state.true) - uninformed.objective(state.true)
    stderr = float(np.std(diffs, ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    return EviEstimate(float(diffs.mean()), stderr, n_samples, diffs)


def allocation_efficiency_ratio(realized: float, oracle: float) -> float:
    if not oracle > 0:
        raise UndefinedMetricError(f"efficiency ratio undefined for oracle utility {oracle}")
    return realized / oracle


def constraint_adjusted_utility(policy_name: str, config: ExperimentConfig, n_runs: int | None = None,
                                seed: int | None = None, workers: int = 1) -> UtilitySummary:
    """Mean and std of realized utility for one policy across seeded runs."""
    if policy_name not in POLICY_NAMES:
        raise ValidationError(f"unknown policy {policy_name!r}")
    n_runs = config.n_runs if n_runs is None else n_runs
    if n_runs < 1:
        raise ValidationError("n_runs must be >= 1")
    sub = config.replace(
        policies=(policy_name,),
        n_runs=n_runs,
        root_seed=config.root_seed if seed is None else seed,
    )
    return run_experiment(sub, workers=workers).summary(policy_name)


@dataclass(frozen=True)
class MetricReport:
    constraint_adjusted_utility: float
    constraint_adjusted_utility_std: float
    evi: float
    evi_stderr: float
    allocation_efficiency_ratio: float
    per_policy: dict

    def rows(self) -> list[tuple[str, float]]:
        """Named rows with the fixed CSV metric names."""
        return [
            ("cau_mean", self.constraint_adjusted_utility),
            ("cau_std", self.constraint_adjusted_utility_std),
            ("evi", self.evi),
            ("evi_stderr", self.evi_stderr),
            ("aer", self.allocation_efficiency_ratio),
        ]


def metric_report(config: ExperimentConfig, policy: str = "greedy", n_samples: int | None = None,
                  workers: int = 1, report=None) -> MetricReport:
    """Headline metrics for ``policy``; reuses an existing experiment report if given."""
    if report is None:
        policies = config.policies if policy in config.policies else config.policies + (policy,)
        report = run_experiment(config.replace(policies=policies), workers=workers)
    summary = report.summary(policy)
    evi = evi_allocation(config, n_samples)
    oracle_mean = float(report.oracle_utilities().mean())
    try:
        aer = allocation_efficiency_ratio(summary.mean, oracle_mean)
    except UndefinedMetricError:
        aer = float("nan")
    return MetricReport(
        constraint_adjusted_utility=summary.mean,
        constraint_adjusted_utility_std=summary.std,
        evi=evi.value,
        evi_stderr=evi.stderr,
        allocation_efficiency_ratio=aer,
        per_policy=report.summaries(),
    )
