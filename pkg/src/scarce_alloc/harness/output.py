"""CSV and metadata emission.

CSV schemas (header rows are fixed)::

    experiment.csv  run,policy,realized_utility,high_severity_denied,auroc
    sweep.csv       ratio,policy,mean_utility,std_utility,advantage_pct

Rows are sorted by run (or ratio) then policy name, floats are written with
``repr`` so values round-trip exactly, and line endings are ``\\n``. The same
report therefore always produces the same bytes.
"""

from __future__ import annotations

import csv
import platform
from pathlib import Path

import matplotlib
import numpy as np
import scipy

from .. import __version__
from .runner import ExperimentReport, SweepReport

EXPERIMENT_HEADER = ("run", "policy", "realized_utility", "high_severity_denied", "auroc")
SWEEP_HEADER = ("ratio", "policy", "mean_utility", "std_utility", "advantage_pct")


class OutputError(OSError):
    pass


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return repr(float(value))


def experiment_rows(report: ExperimentReport) -> list[tuple]:
    rows = []
    for result in sorted(report.runs, key=lambda r: r.run):
        for policy in sorted(report.policies):
            rows.append((result.run, policy, result.utilities[policy], result.denied[policy], result.auroc))
    return rows


def sweep_rows(report: SweepReport) -> list[tuple]:
    rows = []
    for point in sorted(report.points, key=lambda p: p.ratio):
        for policy in sorted(report.policies):
            summary = point.summaries[policy]
            rows.append((point.ratio, policy, summary.mean, summary.std, point.advantage_pct))
    return rows


def _write(path: Path, text: str) -> Path:
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from None
    return path


def csv_text(report) -> str:
    if isinstance(report, ExperimentReport):
        header, rows = EXPERIMENT_HEADER, experiment_rows(report)
    elif isinstance(report, SweepReport):
        header, rows = SWEEP_HEADER, sweep_rows(report)
    else:
        raise TypeError(f"cannot emit {type(report).__name__} as CSV")
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else _fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def emit_csv(report, path) -> Path:
    return _write(path, csv_text(report))


def read_csv(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))


def versions() -> list[tuple[str, str]]:
    return [
        ("scarce_alloc", __version__),
        ("python", platform.python_version()),
        ("numpy", np.__version__),
        ("scipy", scipy.__version__),
        ("matplotlib", matplotlib.__version__),
    ]


def meta_text(config, experiment: ExperimentReport | None = None, sweep: SweepReport | None = None,
              metrics=None) -> str:
    """``key=value`` summary: config echo, library versions, achieved results."""
    lines = ["# config"] + config.to_lines()
    lines.append("# versions")
    lines += [f"version.{name}={value}" for name, value in versions()]
    if experiment is not None and experiment.runs:
        lines.append("# experiment")
        for policy, summary in sorted(experiment.summaries().items()):
            lines.append(f"utility.{policy}.mean={summary.mean!r}")
            lines.append(f"utility.{policy}.std={summary.std!r}")
        for (a, b), gain in sorted(experiment.gains().items()):
            lines.append(f"gain_pct.{a}_vs_{b}={gain!r}")
        aurocs = experiment.aurocs()
        within = np.abs(aurocs - config.cohort.target_auroc) <= config.auroc_tolerance
        lines.append(f"auroc.mean={float(np.mean(aurocs))!r}")
        lines.append(f"auroc.runs_within_tolerance={int(within.sum())}/{len(aurocs)}")
    if sweep is not None and sweep.points:
        lines.append("# sweep")
        for point in sweep.points:
            caps = ",".join(str(c) for c in point.capacities)
            lines.append(f"sweep.{point.ratio!r}.capacities={caps}")
            lines.append(f"sweep.{point.ratio!r}.advantage_pct={point.advantage_pct!r}")
    if metrics is not None:
        lines.append("# metrics")
        lines += [f"metric.{name}={value!r}" for name, value in metrics.rows()]
    return "\n".join(lines) + "\n"


def emit_meta(path, config, **parts) -> Path:
    return _write(path, meta_text(config, **parts))
