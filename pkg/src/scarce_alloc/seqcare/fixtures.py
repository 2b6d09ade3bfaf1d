"""Small ready-made problems used by the tests, the CLI and the README."""

from __future__ import annotations

import numpy as np

from .cmdp import TabularCMDP
from .mdp import TabularMDP
from .pomdp import TabularPOMDP

STABLE, DETERIORATING, CRITICAL = 0, 1, 2
OBSERVE, TREAT = 0, 1


def triage_cmdp(budget: float = 2.0, discount: float = 0.9) -> TabularCMDP:
    """Three-state ward: treatment slows deterioration but draws on a
    discounted treatment budget."""
    T = np.zeros((3, 2, 3))
    T[STABLE, OBSERVE] = [0.80, 0.20, 0.00]
    T[STABLE, TREAT] = [0.95, 0.05, 0.00]
    T[DETERIORATING, OBSERVE] = [0.10, 0.60, 0.30]
    T[DETERIORATING, TREAT] = [0.60, 0.35, 0.05]
    T[CRITICAL, OBSERVE] = [0.00, 0.10, 0.90]
    T[CRITICAL, TREAT] = [0.30, 0.40, 0.30]
    R = np.array([[1.0, 0.95], [0.3, 0.25], [-1.0, -1.05]])
    g = np.array([[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]])
    return TabularCMDP(TabularMDP(T, R, discount), (g,), np.array([budget]))


# Two-state test-or-treat problem.
TEST, TREAT_NOW, WITHHOLD = 0, 1, 2


def toy_test_pomdp(sensitivity: float = 1.0, specificity: float = 1.0,
                   treat_gain: float = 1.0, treat_harm: float = 1.0) -> TabularPOMDP:
    """States: 0 stable, 1 deteriorating. Actions: test, treat, withhold.

    Treating pays ``treat_gain`` when deteriorating and ``-treat_harm`` when
    stable; withholding pays 0. The test leaves the state unchanged and reports
    "positive" (observation 1) with the given sensitivity and specificity.
    """
    T = np.zeros((2, 3, 2))
    for a in range(3):
        T[:, a, :] = np.eye(2)
    R = np.array([[0.0, -treat_harm, 0.0], [0.0, treat_gain, 0.0]])
    O = np.full((2, 3, 2), 0.5)
    O[0, TEST] = [specificity, 1.0 - specificity]
    O[1, TEST] = [1.0 - sensitivity, sensitivity]
    return TabularPOMDP(TabularMDP(T, R, 0.9), O)
