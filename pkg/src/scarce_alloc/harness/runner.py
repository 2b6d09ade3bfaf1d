"""Experiment orchestration: per-run pipeline, multi-run experiment, scarcity sweep.

Every random stream in run ``r`` is seeded from ``SeedSequence([root_seed, r,
stream])``, so a run's result depends only on ``(config, r)`` and never on
which worker executes it or in what order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import allocation as alloc_mod
from ..allocation import UtilityKind, UtilityMatrix
from ..errors import ValidationError
from ..population import Cohort, RiskEstimates, fit_noise_scale, generate_cohort, predict_risks
from .config import ExperimentConfig

COHORT_STREAM = 0
NOISE_STREAM = 1
ARRIVAL_STREAM = 2
RANDOM_POLICY_STREAM = 3


def derive_seed(root_seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([root_seed, *keys]).generate_state(1, np.uint64)[0])


class RunError(RuntimeError):
    def __init__(self, run_index, cause):
        super().__init__(f"run {run_index}: {cause}")
        self.run_index = run_index
        self.cause = cause


@dataclass(frozen=True, eq=False)
class RunState:
    """Everything a policy needs for one simulated cohort."""

    run_index: int
    cohort: Cohort
    estimates: RiskEstimates
    estimated: UtilityMatrix
    true: UtilityMatrix
    arrival_order: np.ndarray
    random_seed: int


@dataclass(frozen=True)
class RunResult:
    run: int
    utilities: dict
    denied: dict
    auroc: float
    sigma: float
    oracle_utility: float


def fit_sigma(config: ExperimentConfig, run_index: int, cohort: Cohort | None = None) -> float:
    if cohort is None:
        cohort = generate_cohort(config.cohort, derive_seed(config.root_seed, run_index, COHORT_STREAM))
    return fit_noise_scale(
        cohort,
        config.cohort.target_auroc,
        tolerance=config.auroc_tolerance,
        seed=derive_seed(config.root_seed, run_index, NOISE_STREAM),
        n_bins=config.n_bins,
    )


def prepare_run(config: ExperimentConfig, run_index: int, sigma: float | None = None) -> RunState:
    """Generate the cohort, fit (unless ``sigma`` is given) and score the risk
    model, and build the estimated and true utility matrices."""
    root = config.root_seed
    cohort = generate_cohort(config.cohort, derive_seed(root, run_index, COHORT_STREAM))
    if sigma is None:
        sigma = fit_sigma(config, run_index, cohort)
    estimates = predict_risks(
        cohort, sigma, n_bins=config.n_bins, seed=derive_seed(root, run_index, NOISE_STREAM)
    )
    resources = config.resources
    n = len(cohort)
    arrival = np.random.default_rng(derive_seed(root, run_index, ARRIVAL_STREAM)).permutation(n)
    return RunState(
        run_index=run_index,
        cohort=cohort,
        estimates=estimates,
        estimated=alloc_mod.utility_matrix(cohort, resources, estimates.predicted_risk, UtilityKind.ESTIMATED),
        true=alloc_mod.utility_matrix(cohort, resources, cohort.baseline_risk, UtilityKind.TRUE),
        arrival_order=arrival,
        random_seed=derive_seed(root, run_index, RANDOM_POLICY_STREAM),
    )


def apply_policy(name: str, state: RunState, config: ExperimentConfig) -> alloc_mod.Allocation:
    resources = config.resources
    if name == "threshold":
        return alloc_mod.policy_risk_threshold(
            state.estimates.predicted_risk, state.estimated, resources, config.threshold, state.arrival_order
        )
    if name == "greedy":
        return alloc_mod.policy_utility_greedy(state.estimated, resources)
    if name == "random":
        return alloc_mod.policy_random(len(state.cohort), resources, state.random_seed)
    if name == "exact":
        return alloc_mod.solve_exact(state.estimated, resources, size_limit=None)
    raise ValidationError(f"unknown policy {name!r}")


def score(alloc, state: RunState, config: ExperimentConfig) -> float:
    return alloc_mod.realized_utility(alloc, state.true, state.cohort, config.lam, config.unallocated)


def simulate_run(config: ExperimentConfig, run_index: int, sigma: float | None = None) -> RunResult:
    try:
        state = prepare_run(config, run_index, sigma)
        utilities, denied = {}, {}
        for name in config.policies:
            allocation = apply_policy(name, state, config)
            utilities[name] = score(allocation, state, config)
            denied[name] = alloc_mod.high_severity_denials(allocation, state.cohort, config.severity_quantile)
        oracle = alloc_mod.solve_exact(state.true, config.resources, size_limit=None)
        return RunResult(
            run=run_index,
            utilities=utilities,
            denied=denied,
            auroc=state.estimates.achieved_auroc,
            sigma=state.estimates.noise_sigma,
            oracle_utility=score(oracle, state, config),
        )
    except RunError:
        raise
    except Exception as exc:
        raise RunError(run_index, exc) from exc


@dataclass(frozen=True)
class UtilitySummary:
    mean: float
    std: float
    runs: int

    @classmethod
    def of(cls, values) -> "UtilitySummary":
        values = np.asarray(values, dtype=float)
        if len(values) == 0:
            return cls(float("nan"), float("nan"), 0)
        std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
        return cls(float(np.mean(values)), std, len(values))


def relative_gain(better: float, baseline: float) -> float:
    """Percent gain of ``better`` over ``baseline`` relative to ``|baseline|``."""
    if baseline == 0:
        return math.copysign(math.inf, better) if better != 0 else 0.0
    return (better - baseline) / abs(baseline) * 100.0


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    policies: tuple
    runs: tuple = field(default=())

    def utilities(self, policy: str) -> np.ndarray:
        return np.array([r.utilities[policy] for r in self.runs], dtype=float)

    def denials(self, policy: str) -> np.ndarray:
        return np.array([r.denied[policy] for r in self.runs], dtype=int)

    def aurocs(self) -> np.ndarray:
        return np.array([r.auroc for r in self.runs], dtype=float)

    def oracle_utilities(self) -> np.ndarray:
        return np.array([r.oracle_utility for r in self.runs], dtype=float)

    def summary(self, policy: str) -> UtilitySummary:
        return UtilitySummary.of(self.utilities(policy))

    def summaries(self) -> dict:
        return {p: self.summary(p) for p in self.policies}

    def gain(self, better: str, baseline: str) -> float:
        return relative_gain(self.summary(better).mean, self.summary(baseline).mean)

    def gains(self) -> dict:
        return {(a, b): self.gain(a, b) for a in self.policies for b in self.policies if a != b}


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ExperimentReport:
    sigma = None
    if config.noise_fit == "once":
        try:
            sigma = fit_sigma(config, 0)
        except Exception as exc:
            raise RunError(0, exc) from exc
    indices = range(config.n_runs)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda r: simulate_run(config, r, sigma), indices))
    else:
        results = [simulate_run(config, r, sigma) for r in indices]
    results.sort(key=lambda r: r.run)
    return ExperimentReport(config=config, policies=tuple(config.policies), runs=tuple(results))


def sweep_capacities(config: ExperimentConfig, ratio: float) -> tuple[int, ...]:
    """Capacities whose total is ``ratio * N``, split in the config's capacity mix."""
    base = [r.capacity for r in config.resources]
    total = sum(base)
    shares = [c / total for c in base] if total > 0 else [1.0 / len(base)] * len(base)
    n = config.cohort.n_patients
    return tuple(max(1, int(round(ratio * n * s))) for s in shares)


@dataclass(frozen=True)
class SweepPoint:
    ratio: float
    capacities: tuple
    summaries: dict
    advantage_pct: float


@dataclass(frozen=True)
class SweepReport:
    points: tuple
    policies: tuple

    @property
    def ratios(self) -> np.ndarray:
        return np.array([p.ratio for p in self.points], dtype=float)

    @property
    def advantages(self) -> np.ndarray:
        return np.array([p.advantage_pct for p in self.points], dtype=float)

    def mean_utility(self, policy: str) -> np.ndarray:
        return np.array([p.summaries[policy].mean for p in self.points], dtype=float)


def run_sweep(config: ExperimentConfig, ratios, runs_per_ratio: int, workers: int = 1) -> SweepReport:
    """Relative advantage of greedy over threshold across capacity-to-demand ratios.

    Every grid point reuses the same root seed, so cohorts are matched across ratios.
    """
    ratios = [float(r) for r in ratios]
    if not ratios:
        raise ValidationError("ratio grid is empty")
    if any(not 0.0 < r <= 1.0 for r in ratios):
        raise ValidationError("ratios must lie in (0, 1]")
    if any(b <= a for a, b in zip(ratios, ratios[1:])):
        raise ValidationError("ratios must be strictly increasing")
    policies = tuple(config.policies)
    for needed in ("greedy", "threshold"):
        if needed not in policies:
            policies += (needed,)
    points = []
    for ratio in ratios:
        capacities = sweep_capacities(config, ratio)
        sub = config.with_capacities(capacities).replace(n_runs=runs_per_ratio, policies=policies)
        report = run_experiment(sub, workers=workers)
        points.append(
            SweepPoint(
                ratio=ratio,
                capacities=capacities,
                summaries=report.summaries(),
                advantage_pct=report.gain("greedy", "threshold"),
            )
        )
    return SweepReport(points=tuple(points), policies=policies)
