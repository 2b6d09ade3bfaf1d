import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scarce_alloc.allocation import (
    UtilityKind,
    UtilityMatrix,
    policy_utility_greedy,
    realized_utility,
    solve_exact,
)
from scarce_alloc.decision_metrics import (
    DiscreteScenario,
    allocation_efficiency_ratio,
    constraint_adjusted_utility,
    evi_allocation,
    evi_discrete,
    metric_report,
)
from scarce_alloc.errors import UndefinedMetricError, ValidationError
from scarce_alloc.population import Cohort, Resource


# --- evi_discrete ---------------------------------------------------------

def test_evi_fully_revealing_binary_signal():
    scenario = DiscreteScenario([0.5, 0.5], [[1.0, 0.0], [0.0, 1.0]])
    assert evi_discrete(scenario) == 0.5


def test_evi_constant_in_signal_is_zero():
    scenario = DiscreteScenario([0.2, 0.3, 0.5], [[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]])
    assert evi_discrete(scenario) == 0.0


def test_evi_single_action_is_zero():
    assert evi_discrete(DiscreteScenario([0.25, 0.75], [[3.0, -1.0]])) == pytest.approx(0.0, abs=1e-15)


def test_scenario_invariants():
    with pytest.raises(ValidationError):
        DiscreteScenario([0.5, 0.6], [[1.0, 0.0]])
    with pytest.raises(ValidationError):
        DiscreteScenario([0.5, 0.5], [[1.0, 0.0, 2.0]])
    with pytest.raises(ValidationError):
        DiscreteScenario([0.5, 0.5], [[1.0, 0.0]], prior_action_utilities=[0.6])
    ok = DiscreteScenario([0.5, 0.5], [[1.0, 0.0]], prior_action_utilities=[0.5])
    assert ok.prior_action_utilities.tolist() == [0.5]


@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_evi_nonnegative_on_random_scenarios(seed):
    rng = np.random.default_rng(seed)
    n_actions, n_signals = int(rng.integers(1, 6)), int(rng.integers(1, 6))
    probs = rng.dirichlet(np.ones(n_signals))
    probs[-1] = 1.0 - probs[:-1].sum()
    if probs[-1] < 0:
        return
    table = rng.normal(size=(n_actions, n_signals))
    assert evi_discrete(DiscreteScenario(probs, table)) >= 0.0


# --- evi_allocation -------------------------------------------------------

def test_evi_allocation_zero_capacity(small_config):
    config = small_config.with_capacities((0, 0))
    estimate = evi_allocation(config, n_samples=5)
    assert estimate.value == 0.0 and estimate.stderr == 0.0


def test_evi_allocation_non_binding_is_zero(small_config):
    n = small_config.cohort.n_patients
    estimate = evi_allocation(small_config.with_capacities((n, n)), n_samples=10)
    assert abs(estimate.value) <= 3 * estimate.stderr + 1e-12


def test_evi_allocation_positive_under_scarcity_and_bounded_by_perfect_information(small_config):
    noisy = evi_allocation(small_config, n_samples=20)
    perfect = evi_allocation(small_config, n_samples=20, perfect_information=True)
    assert noisy.value > 0
    assert np.all(perfect.samples >= -1e-12)
    # Matched seeds: perfect information never does worse in expectation.
    diff = perfect.samples - noisy.samples
    assert diff.mean() >= -3 * diff.std(ddof=1) / np.sqrt(len(diff))


def test_evi_allocation_is_reproducible(small_config):
    a = evi_allocation(small_config, n_samples=4, seed=9)
    b = evi_allocation(small_config, n_samples=4, seed=9)
    assert a.samples.tobytes() == b.samples.tobytes()
    with pytest.raises(ValidationError):
        evi_allocation(small_config, n_samples=0)


# --- allocation efficiency ratio ------------------------------------------

def test_aer_examples():
    assert allocation_efficiency_ratio(4.0, 4.0) == 1.0
    assert allocation_efficiency_ratio(0.0, 4.0) == 0.0
    assert allocation_efficiency_ratio(-2.0, 4.0) == -0.5
    with pytest.raises(UndefinedMetricError):
        allocation_efficiency_ratio(1.0, 0.0)


def test_aer_on_an_eight_patient_instance():
    rng = np.random.default_rng(12)
    weights = rng.gamma(4.0, 0.5, size=8)
    risk = rng.random(8)
    noisy = np.clip(risk + rng.normal(scale=0.2, size=8), 0, 1)
    cohort = Cohort(weights, risk, np.zeros(8), (risk > 0.5).astype(np.int8))
    res = (Resource(0, "a", 2, 0.3), Resource(1, "b", 1, 0.5))
    rho = np.array([0.3, 0.5])
    true = UtilityMatrix(weights[:, None] * risk[:, None] * rho, UtilityKind.TRUE)
    est = UtilityMatrix(weights[:, None] * noisy[:, None] * rho, UtilityKind.ESTIMATED)
    lam = 0.01
    realized = realized_utility(policy_utility_greedy(est, res), true, cohort, lam)
    oracle = realized_utility(solve_exact(true, res), true, cohort, lam)
    ratio = allocation_efficiency_ratio(realized, oracle)
    assert 0 < ratio <= 1 + 1e-9
    assert allocation_efficiency_ratio(oracle, oracle) == 1.0


# --- constraint-adjusted utility and report -------------------------------

def test_cau_single_run_has_zero_std(small_config):
    summary = constraint_adjusted_utility("greedy", small_config, n_runs=1)
    assert summary.runs == 1 and summary.std == 0.0


def test_cau_is_deterministic_and_validates(small_config):
    assert constraint_adjusted_utility("threshold", small_config) == constraint_adjusted_utility(
        "threshold", small_config)
    with pytest.raises(ValidationError):
        constraint_adjusted_utility("oracle", small_config)
    with pytest.raises(ValidationError):
        constraint_adjusted_utility("greedy", small_config, n_runs=0)


def test_metric_report_rows_and_bounds(small_config):
    report = metric_report(small_config, n_samples=5)
    assert [name for name, _ in report.rows()] == ["cau_mean", "cau_std", "evi", "evi_stderr", "aer"]
    assert report.allocation_efficiency_ratio <= 1 + 1e-9
    assert report.evi >= -3 * report.evi_stderr
    assert set(report.per_policy) == set(small_config.policies)
