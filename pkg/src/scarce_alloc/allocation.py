"""Capacity-constrained allocation: utilities, policies and scoring.

The decision problem is the 0/1 program

    max  sum_ij pi_ij * u_ij   s.t.  sum_i pi_ij <= C_j,  pi_ij in {0, 1}.

Constraints bound each resource separately and the objective is additive, so
the program decomposes into one top-``C_j`` selection per resource. Greedy on
the pooled list of pairs is therefore exact on whatever matrix it is handed;
any loss against the true optimum comes from estimation error alone.
"""

from __future__ import annotations

import enum
import warnings
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CapacityCappedWarning, InstanceTooLargeError, ValidationError
from .population import Resource, as_cohort

POLICY_NAMES = ("threshold", "greedy", "random", "exact")


class UtilityKind(enum.Enum):
    ESTIMATED = "estimated"
    TRUE = "true"


@dataclass(frozen=True, eq=False)
class UtilityMatrix:
    values: np.ndarray
    kind: UtilityKind = UtilityKind.ESTIMATED

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise ValidationError("utility matrix must be 2-d (patients x resources)")
        if not np.all(np.isfinite(values)):
            raise ValidationError("utility matrix has non-finite entries")
        if np.any(values < 0):
            raise ValidationError("utility matrix has negative entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class Allocation:
    """Assigned ``(patient_id, resource_id)`` pairs plus the capacities they
    must respect. Not validated on construction; see :func:`validate_allocation`."""

    assignments: tuple[tuple[int, int], ...]
    capacities: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "assignments", tuple((int(i), int(j)) for i, j in self.assignments)
        )
        object.__setattr__(self, "capacities", tuple(int(c) for c in self.capacities))

    def __len__(self):
        return len(self.assignments)

    def as_matrix(self, n_patients: int) -> np.ndarray:
        pi = np.zeros((n_patients, len(self.capacities)), dtype=bool)
        for i, j in self.assignments:
            pi[i, j] = True
        return pi

    def allocated_patients(self) -> set[int]:
        return {i for i, _ in self.assignments}

    def objective(self, um: UtilityMatrix) -> float:
        return float(sum(um.values[i, j] for i, j in set(self.assignments)))


@dataclass(frozen=True)
class Violation:
    kind: str  # "capacity" | "duplicate" | "index"
    resource: int
    detail: str
    patient: int | None = None


@dataclass(frozen=True)
class PolicyOutcome:
    allocation: Allocation
    realized_utility: float
    n_high_severity_denied: int
    policy_name: str


def _capacities(resources: Sequence[Resource]) -> tuple[int, ...]:
    return tuple(r.capacity for r in resources)


def _check_dims(um: UtilityMatrix, resources: Sequence[Resource]):
    if um.shape[1] != len(resources):
        raise ValidationError(
            f"utility matrix has {um.shape[1]} resource columns, expected {len(resources)}"
        )


def utility_matrix(cohort, resources: Sequence[Resource], risks, kind=UtilityKind.ESTIMATED):
    """``u_ij = w_i * rho_j * risk_i``: severity-weighted multiplicative risk reduction."""
    cohort = as_cohort(cohort)
    risks = np.asarray(risks, dtype=float)
    if risks.shape != (len(cohort),):
        raise ValidationError(f"risks has shape {risks.shape}, expected ({len(cohort)},)")
    rho = np.array([r.risk_reduction_factor for r in resources], dtype=float)
    values = cohort.severity_weight[:, None] * risks[:, None] * rho[None, :]
    return UtilityMatrix(values.reshape(len(cohort), len(resources)), UtilityKind(kind))


def policy_risk_threshold(risks, um: UtilityMatrix, resources, threshold: float, arrival_order):
    """Scan arrivals; anyone with risk strictly above ``threshold`` takes one
    unit of every resource that still has room."""
    risks = np.asarray(risks, dtype=float)
    n = len(risks)
    _check_dims(um, resources)
    if um.shape[0] != n:
        raise ValidationError("risks and utility matrix disagree on patient count")
    if not 0.0 <= threshold <= 1.0:
        raise ValidationError(f"threshold must lie in [0, 1], got {threshold}")
    order = np.asarray(arrival_order, dtype=int)
    if sorted(order.tolist()) != list(range(n)):
        raise ValidationError("arrival_order must be a permutation of patient ids")
    remaining = list(_capacities(resources))
    pairs = []
    for i in order:
        if not any(remaining):
            break
        if risks[i] > threshold:
            for j, left in enumerate(remaining):
                if left > 0:
                    pairs.append((int(i), j))
                    remaining[j] -= 1
    return Allocation(tuple(pairs), _capacities(resources))


def policy_utility_greedy(um: UtilityMatrix, resources):
    """Accept pairs in order of descending utility while their resource has room.

    Ties break on lower patient id, then lower resource id.
    """
    _check_dims(um, resources)
    n, m = um.shape
    remaining = list(_capacities(resources))
    flat = um.values.ravel()  # row-major: index = i*m + j
    patient_idx = np.repeat(np.arange(n), m)
    resource_idx = np.tile(np.arange(m), n)
    order = np.lexsort((resource_idx, patient_idx, -flat))
    budget = sum(remaining)
    pairs = []
    for k in order:
        if budget == 0:
            break
        j = int(resource_idx[k])
        if remaining[j] > 0:
            pairs.append((int(patient_idx[k]), j))
            remaining[j] -= 1
            budget -= 1
    return Allocation(tuple(pairs), _capacities(resources))


def policy_random(n_patients: int, resources, seed):
    """Each resource independently goes to a uniform random set of distinct patients."""
    if n_patients < 1:
        raise ValidationError("n_patients must be >= 1")
    rng = np.random.default_rng(seed)
    pairs = []
    for j, res in enumerate(resources):
        take = res.capacity
        if take > n_patients:
            warnings.warn(
                f"capacity {take} of {res.name!r} exceeds {n_patients} patients; capped",
                CapacityCappedWarning,
                stacklevel=2,
            )
            take = n_patients
        chosen = rng.choice(n_patients, size=take, replace=False)
        pairs.extend((int(i), j) for i in np.sort(chosen))
    return Allocation(tuple(pairs), _capacities(resources))


def solve_exact(um: UtilityMatrix, resources, size_limit: int | None = 20):
    """Global maximizer of the allocation program.

    Per resource the best feasible choice is its ``C_j`` largest positive
    entries, so the joint optimum is their union. ``size_limit=None`` lifts
    the patient-count guard.
    """
    _check_dims(um, resources)
    n, m = um.shape
    if size_limit is not None and n > size_limit:
        raise InstanceTooLargeError(f"{n} patients exceeds size_limit={size_limit}")
    pairs = []
    ids = np.arange(n)
    for j, res in enumerate(resources):
        column = um.values[:, j]
        order = np.lexsort((ids, -column))
        for i in order[: res.capacity]:
            if column[i] <= 0:
                break
            pairs.append((int(i), j))
    return Allocation(tuple(pairs), _capacities(resources))


def validate_allocation(alloc: Allocation, resources=None) -> list[Violation]:
    """Return every capacity overrun, duplicate pair and bad index; empty means feasible."""
    capacities = _capacities(resources) if resources is not None else alloc.capacities
    violations = []
    counts = Counter(alloc.assignments)
    for (i, j), c in sorted(counts.items()):
        if c > 1:
            violations.append(
                Violation("duplicate", j, f"pair (patient {i}, resource {j}) appears {c} times", i)
            )
    per_resource = Counter(j for _, j in counts)
    for j, used in sorted(per_resource.items()):
        if not 0 <= j < len(capacities):
            violations.append(Violation("index", j, f"unknown resource {j}"))
        elif used > capacities[j]:
            violations.append(
                Violation("capacity", j, f"resource {j}: {used} assignments > capacity {capacities[j]}")
            )
    for i, _ in counts:
        if i < 0:
            violations.append(Violation("index", -1, f"negative patient id {i}", i))
    return violations


def _ensure_feasible(alloc: Allocation, n_patients: int):
    problems = validate_allocation(alloc)
    if any(i >= n_patients for i, _ in alloc.assignments):
        problems.append(Violation("index", -1, "patient id out of range"))
    if problems:
        raise ValidationError("infeasible allocation: " + "; ".join(v.detail for v in problems))


def realized_utility(alloc: Allocation, true_um: UtilityMatrix, cohort, lam: float,
                     unallocated: str = "any") -> float:
    """Delivered true utility minus ``lam`` times the severity left uncovered.

    ``unallocated="any"`` penalizes patients holding no resource at all;
    ``"per_resource"`` charges each patient once per resource they lack.
    """
    cohort = as_cohort(cohort)
    if lam < 0:
        raise ValidationError("lambda must be >= 0")
    n, m = true_um.shape
    if n != len(cohort) or m != len(alloc.capacities):
        raise ValidationError("allocation, utility matrix and cohort dimensions disagree")
    _ensure_feasible(alloc, n)
    pi = alloc.as_matrix(n)
    gained = float(true_um.values[pi].sum())
    w = cohort.severity_weight
    if unallocated == "any":
        shortfall = float(w[~pi.any(axis=1)].sum())
    elif unallocated == "per_resource":
        shortfall = float((w[:, None] * ~pi).sum())
    else:
        raise ValidationError(f"unknown unallocated mode {unallocated!r}")
    return gained - lam * shortfall


def high_severity_denials(alloc: Allocation, cohort, quantile: float = 0.9) -> int:
    cohort = as_cohort(cohort)
    if not 0.0 < quantile < 1.0:
        raise ValidationError("quantile must lie in (0, 1)")
    w = cohort.severity_weight
    cutoff = np.quantile(w, quantile)
    served = np.zeros(len(w), dtype=bool)
    served[list(alloc.allocated_patients())] = True
    return int(np.sum((w > cutoff) & ~served))
