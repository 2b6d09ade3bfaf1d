"""Synthetic patient cohorts and a calibrated risk model with pinned AUROC.

The risk model observes ``logit(p_i) + N(0, sigma^2)`` and recalibrates the
noisy score with equal-count bins pooled into a monotone step function.
``sigma`` is chosen by bisection so that the recalibrated predictions reach a
target AUROC against the realized outcomes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import (
    AurocBelowTargetWarning,
    FitError,
    UndefinedMetricError,
    ValidationError,
)

LOGIT_CLAMP = 1e-6
SIGMA_BRACKET = 10.0
SIGMA_MAX = 160.0


@dataclass(frozen=True)
class Patient:
    id: int
    severity_weight: float
    baseline_risk: float
    raw_score: float
    outcome: int

    def __post_init__(self):
        if not self.severity_weight > 0:
            raise ValidationError(f"severity_weight must be > 0, got {self.severity_weight}")
        if not 0.0 <= self.baseline_risk <= 1.0:
            raise ValidationError(f"baseline_risk must lie in [0, 1], got {self.baseline_risk}")
        if self.outcome not in (0, 1):
            raise ValidationError(f"outcome must be 0 or 1, got {self.outcome}")


@dataclass(frozen=True)
class Resource:
    id: int
    name: str
    capacity: int
    risk_reduction_factor: float

    def __post_init__(self):
        if int(self.capacity) != self.capacity or self.capacity < 0:
            raise ValidationError(f"resource {self.name!r}: capacity must be a nonnegative integer")
        if not 0.0 < self.risk_reduction_factor <= 1.0:
            raise ValidationError(
                f"resource {self.name!r}: risk_reduction_factor must lie in (0, 1]"
            )

    def with_capacity(self, capacity: int) -> "Resource":
        return Resource(self.id, self.name, int(capacity), self.risk_reduction_factor)


def default_resources() -> tuple[Resource, ...]:
    return (
        Resource(0, "imaging", 50, 0.3),
        Resource(1, "bed", 30, 0.5),
    )


@dataclass(frozen=True)
class CohortSpec:
    n_patients: int = 500
    severity_shape: float = 64.0
    severity_scale: float = 1.0 / 32.0
    risk_alpha: float = 0.4
    risk_beta: float = 0.12
    resources: tuple[Resource, ...] = field(default_factory=default_resources)
    target_auroc: float = 0.85

    def __post_init__(self):
        if int(self.n_patients) != self.n_patients or self.n_patients < 1:
            raise ValidationError(f"n_patients must be a positive integer, got {self.n_patients}")
        for name in ("severity_shape", "severity_scale", "risk_alpha", "risk_beta"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValidationError(f"{name} must be > 0, got {value}")
        if not 0.5 < self.target_auroc <= 1.0:
            raise ValidationError(f"target_auroc must lie in (0.5, 1.0], got {self.target_auroc}")
        object.__setattr__(self, "resources", tuple(self.resources))
        ids = [r.id for r in self.resources]
        if ids != list(range(len(ids))):
            raise ValidationError("resource ids must be 0..M-1 in order")


@dataclass(frozen=True, eq=False)
class Cohort(Sequence[Patient]):
    """Column-oriented cohort; indexing yields :class:`Patient` records."""

    severity_weight: np.ndarray
    baseline_risk: np.ndarray
    raw_score: np.ndarray
    outcome: np.ndarray

    def __post_init__(self):
        n = len(self.severity_weight)
        for name in ("baseline_risk", "raw_score", "outcome"):
            if len(getattr(self, name)) != n:
                raise ValidationError(f"cohort column {name} has wrong length")
        for name in ("severity_weight", "baseline_risk", "raw_score", "outcome"):
            getattr(self, name).setflags(write=False)

    def __len__(self) -> int:
        return len(self.severity_weight)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[k] for k in range(*i.indices(len(self)))]
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        return Patient(
            id=i,
            severity_weight=float(self.severity_weight[i]),
            baseline_risk=float(self.baseline_risk[i]),
            raw_score=float(self.raw_score[i]),
            outcome=int(self.outcome[i]),
        )

    def __iter__(self) -> Iterator[Patient]:
        return (self[i] for i in range(len(self)))

    @classmethod
    def from_patients(cls, patients: Sequence[Patient]) -> "Cohort":
        if isinstance(patients, Cohort):
            return patients
        return cls(
            severity_weight=np.array([p.severity_weight for p in patients], dtype=float),
            baseline_risk=np.array([p.baseline_risk for p in patients], dtype=float),
            raw_score=np.array([p.raw_score for p in patients], dtype=float),
            outcome=np.array([p.outcome for p in patients], dtype=np.int8),
        )


def as_cohort(cohort) -> Cohort:
    return Cohort.from_patients(cohort)


def clamped_logit(p) -> np.ndarray:
    p = np.clip(np.asarray(p, dtype=float), LOGIT_CLAMP, 1.0 - LOGIT_CLAMP)
    return np.log(p) - np.log1p(-p)


def generate_cohort(spec: CohortSpec, seed) -> Cohort:
    """Draw ``spec.n_patients`` patients with Gamma severities, Beta risks and
    Bernoulli outcomes. Bitwise reproducible for a given seed."""
    rng = np.random.default_rng(seed)
    n = spec.n_patients
    severity = rng.gamma(spec.severity_shape, spec.severity_scale, size=n)
    # Gamma draws can underflow to exactly 0 for tiny shapes.
    severity = np.maximum(severity, np.finfo(float).tiny)
    risk = rng.beta(spec.risk_alpha, spec.risk_beta, size=n)
    outcome = (rng.random(n) < risk).astype(np.int8)
    return Cohort(
        severity_weight=severity,
        baseline_risk=risk,
        raw_score=clamped_logit(risk),
        outcome=outcome,
    )


def auroc(scores, outcomes) -> float:
    """Mann-Whitney AUROC; tied scores count one half."""
    scores = np.asarray(scores, dtype=float)
    outcomes = np.asarray(outcomes)
    if scores.shape != outcomes.shape or scores.ndim != 1:
        raise ValidationError("scores and outcomes must be 1-d vectors of equal length")
    positive = outcomes == 1
    if not np.all((outcomes == 0) | positive):
        raise ValidationError("outcomes must be binary")
    n_pos = int(positive.sum())
    n_neg = len(outcomes) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUROC needs at least one positive and one negative outcome")
    ranks = rankdata(scores)
    u = ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _recalibrate(scores: np.ndarray, outcomes: np.ndarray, n_bins: int) -> np.ndarray:
    order = np.argsort(scores, kind="stable")
    blocks = []  # [event_count, size, [index arrays]]
    for idx in np.array_split(order, min(n_bins, len(order))):
        if len(idx) == 0:
            continue
        blocks.append([float(outcomes[idx].sum()), len(idx), [idx]])
        # Pool adjacent violators until rates are non-decreasing.
        while len(blocks) > 1 and blocks[-2][0] * blocks[-1][1] > blocks[-1][0] * blocks[-2][1]:
            last = blocks.pop()
            blocks[-1][0] += last[0]
            blocks[-1][1] += last[1]
            blocks[-1][2].extend(last[2])
    predicted = np.empty(len(scores))
    for events, size, parts in blocks:
        predicted[np.concatenate(parts)] = events / size
    return predicted


@dataclass(frozen=True)
class RiskEstimates:
    predicted_risk: np.ndarray
    noise_sigma: float
    achieved_auroc: float
    raw_score: np.ndarray | None = None

    def __post_init__(self):
        p = self.predicted_risk
        if np.any(p < 0) or np.any(p > 1):
            raise ValidationError("predicted risks must lie in [0, 1]")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be >= 0")

    def __len__(self):
        return len(self.predicted_risk)


def _noise(seed, n: int) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal(n)


def predict_risks(cohort, sigma: float, n_bins: int = 10, seed=0) -> RiskEstimates:
    cohort = as_cohort(cohort)
    if len(cohort) == 0:
        raise ValidationError("cohort is empty")
    if sigma < 0:
        raise ValidationError(f"sigma must be >= 0, got {sigma}")
    if n_bins < 2:
        raise ValidationError(f"n_bins must be >= 2, got {n_bins}")
    scores = clamped_logit(cohort.baseline_risk) + sigma * _noise(seed, len(cohort))
    predicted = _recalibrate(scores, cohort.outcome, n_bins)
    try:
        achieved = auroc(predicted, cohort.outcome)
    except UndefinedMetricError:
        achieved = float("nan")
    return RiskEstimates(predicted, float(sigma), achieved, scores)


def fit_noise_scale(
    cohort,
    target_auroc: float,
    tolerance: float = 0.01,
    seed=0,
    n_bins: int | None = None,
    trace: list | None = None,
    max_iter: int = 100,
) -> float:
    """Bisect on the noise scale until the empirical AUROC is within
    ``tolerance`` of ``target_auroc``.

    With ``n_bins=None`` the raw noisy scores are scored; with an integer the
    recalibrated output of :func:`predict_risks` (same seed) is scored, so that
    the fitted sigma reproduces the target exactly downstream. Every
    ``(sigma, auroc)`` evaluation is appended to ``trace`` when given.
    """
    cohort = as_cohort(cohort)
    if not 0.5 < target_auroc <= 1.0:
        raise ValidationError(f"target_auroc must lie in (0.5, 1.0], got {target_auroc}")
    if tolerance <= 0:
        raise ValidationError("tolerance must be > 0")
    z = _noise(seed, len(cohort))
    base = clamped_logit(cohort.baseline_risk)
    outcomes = cohort.outcome

    def evaluate(sigma):
        scores = base + sigma * z
        if n_bins is not None:
            scores = _recalibrate(scores, outcomes, n_bins)
        value = auroc(scores, outcomes)
        if trace is not None:
            trace.append((sigma, value))
        return value

    best = (np.inf, 0.0, None)  # (|gap|, sigma, auroc)

    def record(sigma, value):
        nonlocal best
        gap = abs(value - target_auroc)
        if gap < best[0]:
            best = (gap, sigma, value)
        return gap <= tolerance

    noiseless = evaluate(0.0)
    if noiseless < target_auroc:
        if not record(0.0, noiseless):
            warnings.warn(
                f"noiseless AUROC {noiseless:.4f} is below target {target_auroc}; returning sigma=0",
                AurocBelowTargetWarning,
                stacklevel=2,
            )
        return 0.0
    if record(0.0, noiseless):
        return 0.0

    lo, hi = 0.0, SIGMA_BRACKET
    hi_value = evaluate(hi)
    while hi_value > target_auroc and hi < SIGMA_MAX:
        lo = hi
        hi *= 2.0
        hi_value = evaluate(hi)
    if record(hi, hi_value):
        return hi
    if hi_value > target_auroc:
        raise FitError(
            f"AUROC {hi_value:.4f} still above target at sigma={hi}", best_auroc=best[2]
        )

    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        value = evaluate(mid)
        if record(mid, value):
            return mid
        if value > target_auroc:
            lo = mid
        else:
            hi = mid
    raise FitError(
        f"no sigma within {tolerance} of target {target_auroc}; best AUROC {best[2]:.4f}",
        best_auroc=best[2],
    )


def calibration_error(estimates, outcomes, n_bins: int = 10) -> float:
    """Expected calibration error over equal-width probability bins, weighted
    by bin occupancy."""
    predicted = np.asarray(
        estimates.predicted_risk if isinstance(estimates, RiskEstimates) else estimates,
        dtype=float,
    )
    outcomes = np.asarray(outcomes, dtype=float)
    if predicted.shape != outcomes.shape:
        raise ValidationError("predictions and outcomes differ in length")
    if n_bins < 1:
        raise ValidationError("n_bins must be >= 1")
    if len(predicted) == 0:
        return 0.0
    bins = np.minimum((predicted * n_bins).astype(int), n_bins - 1)
    total = 0.0
    for b in np.unique(bins):
        mask = bins == b
        total += mask.sum() * abs(predicted[mask].mean() - outcomes[mask].mean())
    return float(total / len(predicted))
