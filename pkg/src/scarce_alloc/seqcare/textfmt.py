"""Plain-text tabular problem files.

Layout (``#`` starts a comment, blank lines are ignored)::

    3 2 0.9                  # header: states actions gamma
    transition               # S*A rows of S probabilities, state-major:
    0.80 0.20 0.00           #   (s=0,a=0), (s=0,a=1), (s=1,a=0), ...
    ...
    reward                   # S rows of A rewards
    1.0 0.95
    ...
    consumption 2.0          # optional, repeatable: budget, then S rows of A values
    0 1
    ...
    start                    # optional: one row of S probabilities
    0.5 0.25 0.25

A file with consumption blocks describes a constrained MDP.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ValidationError
from .cmdp import TabularCMDP
from .mdp import TabularMDP


@dataclass(frozen=True, eq=False)
class ProblemFile:
    mdp: TabularMDP
    cmdp: TabularCMDP | None
    start: np.ndarray | None


class ProblemFormatError(ValidationError):
    pass


def _rows(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def parse_problem(text: str, origin: str = "<problem>") -> ProblemFile:
    rows = list(_rows(text))
    if not rows:
        raise ProblemFormatError(f"{origin}: empty problem file")
    lineno, header = rows[0]
    try:
        if len(header) != 3:
            raise ValueError
        n_states, n_actions, gamma = int(header[0]), int(header[1]), float(header[2])
    except ValueError:
        raise ProblemFormatError(f"{origin}:{lineno}: header must be 'states actions gamma'") from None
    if n_states < 1 or n_actions < 1:
        raise ProblemFormatError(f"{origin}:{lineno}: states and actions must be positive")

    pos = 1

    def numeric_block(n_rows, width, label):
        nonlocal pos
        out = []
        for _ in range(n_rows):
            if pos >= len(rows):
                raise ProblemFormatError(f"{origin}: {label} block ends early (need {n_rows} rows)")
            ln, fields = rows[pos]
            if len(fields) != width:
                raise ProblemFormatError(f"{origin}:{ln}: {label} row needs {width} values, got {len(fields)}")
            try:
                out.append([float(f) for f in fields])
            except ValueError:
                raise ProblemFormatError(f"{origin}:{ln}: non-numeric value in {label} block") from None
            pos += 1
        return np.array(out)

    transition = reward = start = None
    consumptions, budgets = [], []
    while pos < len(rows):
        ln, fields = rows[pos]
        keyword = fields[0].lower()
        pos += 1
        if keyword == "transition" and len(fields) == 1:
            transition = numeric_block(n_states * n_actions, n_states, "transition").reshape(
                n_states, n_actions, n_states)
        elif keyword == "reward" and len(fields) == 1:
            reward = numeric_block(n_states, n_actions, "reward")
        elif keyword == "consumption" and len(fields) == 2:
            try:
                budgets.append(float(fields[1]))
            except ValueError:
                raise ProblemFormatError(f"{origin}:{ln}: consumption budget must be a number") from None
            consumptions.append(numeric_block(n_states, n_actions, "consumption"))
        elif keyword == "start" and len(fields) == 1:
            start = numeric_block(1, n_states, "start")[0]
        else:
            raise ProblemFormatError(f"{origin}:{ln}: unexpected line {' '.join(fields)!r}")
    if transition is None or reward is None:
        raise ProblemFormatError(f"{origin}: transition and reward blocks are required")
    try:
        mdp = TabularMDP(transition, reward, gamma)
        cmdp = TabularCMDP(mdp, tuple(consumptions), np.array(budgets)) if consumptions else None
    except ValidationError as exc:
        raise ProblemFormatError(f"{origin}: {exc}") from None
    return ProblemFile(mdp, cmdp, start)


def load_problem(path) -> ProblemFile:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ProblemFormatError(f"{path}: cannot read problem file: {exc.strerror or exc}") from None
    return parse_problem(text, str(path))


def format_problem(mdp: TabularMDP, cmdp: TabularCMDP | None = None, start=None) -> str:
    lines = [f"{mdp.n_states} {mdp.n_actions} {mdp.discount!r}", "transition"]
    for s in range(mdp.n_states):
        for a in range(mdp.n_actions):
            lines.append(" ".join(repr(float(x)) for x in mdp.transition[s, a]))
    lines.append("reward")
    lines += [" ".join(repr(float(x)) for x in row) for row in mdp.reward]
    if cmdp is not None:
        for g, budget in zip(cmdp.consumptions, cmdp.budgets):
            lines.append(f"consumption {float(budget)!r}")
            lines += [" ".join(repr(float(x)) for x in row) for row in g]
    if start is not None:
        lines += ["start", " ".join(repr(float(x)) for x in start)]
    return "\n".join(lines) + "\n"
