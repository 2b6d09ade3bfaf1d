import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scarce_alloc.errors import AurocBelowTargetWarning, UndefinedMetricError, ValidationError
from scarce_alloc.population import (
    Cohort,
    CohortSpec,
    Patient,
    Resource,
    auroc,
    calibration_error,
    clamped_logit,
    fit_noise_scale,
    generate_cohort,
    predict_risks,
)


def pairwise_auroc(scores, outcomes):
    pos = [s for s, y in zip(scores, outcomes) if y == 1]
    neg = [s for s, y in zip(scores, outcomes) if y == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(pos, neg))
    return wins / (len(pos) * len(neg))


@pytest.fixture(scope="module")
def default_cohort():
    return generate_cohort(CohortSpec(), seed=11)


# --- domain types ---------------------------------------------------------

def test_patient_and_resource_invariants():
    with pytest.raises(ValidationError, match="severity_weight"):
        Patient(0, 0.0, 0.5, 0.0, 1)
    with pytest.raises(ValidationError, match="baseline_risk"):
        Patient(0, 1.0, 1.5, 0.0, 1)
    with pytest.raises(ValidationError, match="outcome"):
        Patient(0, 1.0, 0.5, 0.0, 2)
    with pytest.raises(ValidationError, match="capacity"):
        Resource(0, "bed", -1, 0.5)
    with pytest.raises(ValidationError, match="risk_reduction_factor"):
        Resource(0, "bed", 1, 0.0)
    assert Resource(0, "bed", 3, 1.0).with_capacity(7).capacity == 7


@pytest.mark.parametrize(
    "field, value",
    [("n_patients", 0), ("severity_shape", 0.0), ("severity_scale", -1.0), ("risk_alpha", 0.0),
     ("risk_beta", float("nan")), ("target_auroc", 0.5), ("target_auroc", 1.01)],
)
def test_cohort_spec_names_invalid_field(field, value):
    with pytest.raises(ValidationError, match=field):
        CohortSpec(**{field: value})


# --- generate_cohort ------------------------------------------------------

def test_default_spec_generates_500_patients_with_two_resources():
    spec = CohortSpec()
    assert [r.capacity for r in spec.resources] == [50, 30]
    cohort = generate_cohort(spec, seed=0)
    assert len(cohort) == 500
    assert all(isinstance(p, Patient) for p in cohort[:3])


def test_single_patient_cohort_is_valid():
    (patient,) = list(generate_cohort(CohortSpec(n_patients=1, severity_shape=0.01), seed=4))
    assert patient.severity_weight > 0 and 0 <= patient.baseline_risk <= 1 and patient.outcome in (0, 1)


def test_generate_cohort_is_bitwise_deterministic():
    a = generate_cohort(CohortSpec(n_patients=300), seed=123)
    b = generate_cohort(CohortSpec(n_patients=300), seed=123)
    for name in ("severity_weight", "baseline_risk", "raw_score", "outcome"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()
    c = generate_cohort(CohortSpec(n_patients=300), seed=124)
    assert a.baseline_risk.tobytes() != c.baseline_risk.tobytes()


def test_cohort_columns_are_read_only_and_roundtrip_through_patients(default_cohort):
    with pytest.raises(ValueError):
        default_cohort.baseline_risk[0] = 0.5
    rebuilt = Cohort.from_patients(list(default_cohort))
    assert np.array_equal(rebuilt.severity_weight, default_cohort.severity_weight)
    assert np.array_equal(rebuilt.outcome, default_cohort.outcome)


def test_clamped_logit_is_finite_at_the_edges():
    values = clamped_logit([0.0, 0.5, 1.0])
    assert np.all(np.isfinite(values)) and values[1] == 0.0
    assert values[0] == pytest.approx(-values[2])


# --- auroc ----------------------------------------------------------------

@pytest.mark.parametrize(
    "scores, outcomes, expected",
    [([0.9, 0.8, 0.3, 0.2], [1, 1, 0, 0], 1.0),
     ([0.2, 0.3, 0.8, 0.9], [1, 1, 0, 0], 0.0),
     ([0.9, 0.2, 0.8, 0.3], [1, 0, 0, 1], 0.75),
     ([0.5, 0.5], [1, 0], 0.5)],
)
def test_auroc_examples(scores, outcomes, expected):
    assert auroc(scores, outcomes) == expected
    assert pairwise_auroc(scores, outcomes) == expected


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 1)), min_size=2, max_size=40))
def test_auroc_matches_pair_enumeration(data):
    scores = [s for s, _ in data]
    outcomes = [y for _, y in data]
    if len(set(outcomes)) < 2:
        with pytest.raises(UndefinedMetricError):
            auroc(scores, outcomes)
    else:
        assert auroc(scores, outcomes) == pytest.approx(pairwise_auroc(scores, outcomes), abs=1e-12)


def test_auroc_rejects_bad_input():
    with pytest.raises(UndefinedMetricError):
        auroc([0.1, 0.2], [1, 1])
    with pytest.raises(ValidationError):
        auroc([0.1, 0.2], [1, 0, 1])
    with pytest.raises(ValidationError):
        auroc([0.1, 0.2], [1, 2])


# --- fit_noise_scale ------------------------------------------------------

def test_fit_hits_target_on_default_cohort(default_cohort):
    sigma = fit_noise_scale(default_cohort, 0.85, tolerance=0.01, seed=5)
    achieved = auroc(clamped_logit(default_cohort.baseline_risk)
                     + sigma * np.random.default_rng(5).standard_normal(len(default_cohort)),
                     default_cohort.outcome)
    assert 0.84 <= achieved <= 0.86


def test_fit_against_recalibrated_output_reproduces_downstream(default_cohort):
    sigma = fit_noise_scale(default_cohort, 0.85, tolerance=0.01, seed=5, n_bins=10)
    estimates = predict_risks(default_cohort, sigma, n_bins=10, seed=5)
    assert abs(estimates.achieved_auroc - 0.85) <= 0.01


def test_target_one_gives_zero_sigma(default_cohort):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AurocBelowTargetWarning)
        assert fit_noise_scale(default_cohort, 1.0, tolerance=0.01) == 0.0


def test_unreachable_target_warns_and_returns_zero():
    cohort = generate_cohort(CohortSpec(n_patients=400, risk_alpha=2, risk_beta=5), seed=1)
    with pytest.warns(AurocBelowTargetWarning):
        assert fit_noise_scale(cohort, 0.95, tolerance=0.01) == 0.0


def test_near_chance_target_gives_large_sigma(default_cohort):
    trace = []
    sigma = fit_noise_scale(default_cohort, 0.51, tolerance=0.01, seed=2, trace=trace)
    assert sigma > 1.0
    # Verify against a direct AUROC evaluation at the returned sigma.
    direct = auroc(clamped_logit(default_cohort.baseline_risk)
                   + sigma * np.random.default_rng(2).standard_normal(len(default_cohort)),
                   default_cohort.outcome)
    assert 0.50 <= direct <= 0.52
    assert trace[-1] == (sigma, direct)


def test_bisection_trace_is_monotone_in_sigma(default_cohort):
    trace = []
    fit_noise_scale(default_cohort, 0.7, tolerance=1e-4, seed=9, trace=trace)
    ordered = sorted(trace)
    aucs = [a for _, a in ordered]
    assert all(b <= a + 1e-12 for a, b in zip(aucs, aucs[1:]))


def test_fit_validates_arguments(default_cohort):
    with pytest.raises(ValidationError):
        fit_noise_scale(default_cohort, 0.5)
    with pytest.raises(ValidationError):
        fit_noise_scale(default_cohort, 0.8, tolerance=0)


# --- predict_risks --------------------------------------------------------

def test_sigma_zero_preserves_true_risk_ranking(default_cohort):
    estimates = predict_risks(default_cohort, 0.0, n_bins=10)
    order = np.argsort(default_cohort.baseline_risk, kind="stable")
    assert np.all(np.diff(estimates.predicted_risk[order]) >= 0)


def test_calibration_in_the_large(default_cohort):
    sigma = fit_noise_scale(default_cohort, 0.85, seed=3, n_bins=10)
    estimates = predict_risks(default_cohort, sigma, n_bins=10, seed=3)
    assert abs(estimates.predicted_risk.mean() - default_cohort.outcome.mean()) <= 0.02


@settings(max_examples=60, deadline=None)
@given(sigma=st.floats(0, 20), n_bins=st.integers(2, 30), seed=st.integers(0, 2**31),
       n=st.integers(1, 120))
def test_predictions_are_probabilities_monotone_and_reproducible(sigma, n_bins, seed, n):
    cohort = generate_cohort(CohortSpec(n_patients=n), seed=seed)
    a = predict_risks(cohort, sigma, n_bins=n_bins, seed=seed)
    b = predict_risks(cohort, sigma, n_bins=n_bins, seed=seed)
    assert a.predicted_risk.tobytes() == b.predicted_risk.tobytes()
    assert len(a) == n
    assert np.all((a.predicted_risk >= 0) & (a.predicted_risk <= 1))
    order = np.argsort(a.raw_score, kind="stable")
    assert np.all(np.diff(a.predicted_risk[order]) >= 0)
    if len(set(cohort.outcome.tolist())) == 2:
        assert auroc(a.predicted_risk, cohort.outcome) == pytest.approx(a.achieved_auroc, abs=1e-12)
    else:
        assert np.isnan(a.achieved_auroc)


def test_predict_risks_validates_arguments(default_cohort):
    with pytest.raises(ValidationError):
        predict_risks(default_cohort, -1.0)
    with pytest.raises(ValidationError):
        predict_risks(default_cohort, 1.0, n_bins=1)
    with pytest.raises(ValidationError):
        predict_risks([], 1.0)


# --- calibration_error ----------------------------------------------------

def test_calibration_error_examples():
    assert calibration_error(np.array([1.0, 1.0]), [0, 0], n_bins=1) == 1.0
    assert calibration_error(np.array([0.8, 0.8, 0.2, 0.2]), [1, 0, 0, 0], n_bins=2) == pytest.approx(0.25)
    assert calibration_error(np.array([0.5, 0.5, 0.0, 0.0]), [1, 0, 0, 0], n_bins=10) == 0.0


def test_calibration_error_of_recalibrated_predictions_is_zero_on_its_own_bins(default_cohort):
    estimates = predict_risks(default_cohort, 0.0, n_bins=10)
    # Each pooled block predicts its own event rate; equal-width bins may merge
    # blocks but cannot separate them, so the error stays small.
    assert calibration_error(estimates, default_cohort.outcome, n_bins=10) < 0.05


def test_calibration_error_length_mismatch():
    with pytest.raises(ValidationError):
        calibration_error(np.array([0.1]), [0, 1])
