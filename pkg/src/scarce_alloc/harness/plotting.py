"""SVG charts for experiment and sweep reports (matplotlib, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .output import OutputError  # noqa: E402
from .runner import ExperimentReport, SweepReport  # noqa: E402

# Fixed hash salt and no date keep repeated renders byte-identical.
_RC = {"svg.hashsalt": "scarce-alloc", "svg.fonttype": "path"}
_METADATA = {"Date": None}


def _experiment_axes(ax, report: ExperimentReport):
    policies = list(report.policies) if report.runs else []
    means = [report.summary(p).mean for p in policies]
    stds = [report.summary(p).std for p in policies]
    x = np.arange(len(policies))
    if policies:
        ax.bar(x, means, yerr=stds, capsize=6, color="#4c72b0", edgecolor="black", linewidth=0.6)
    ax.set_xticks(x, policies)
    ax.set_xlabel("policy")
    ax.set_ylabel("mean realized utility (error bars: 1 std)")
    ax.set_title(f"Realized utility over {len(report.runs)} runs")
    ax.axhline(0.0, color="black", linewidth=0.6)


def _sweep_axes(ax, report: SweepReport):
    if report.points:
        ax.plot(report.ratios, report.advantages, marker="o", color="#c44e52")
        ax.set_xscale("log")
        ax.set_xticks(report.ratios, [f"{r:g}" for r in report.ratios])
        ax.minorticks_off()
    ax.set_xlabel("capacity-to-demand ratio")
    ax.set_ylabel("greedy advantage over threshold (%)")
    ax.set_title("Advantage of utility-aware allocation vs scarcity")
    ax.grid(True, linewidth=0.4, alpha=0.6)


def emit_chart(report, path) -> Path:
    path = Path(path)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.4, 4.2))
        try:
            if isinstance(report, ExperimentReport):
                _experiment_axes(ax, report)
            elif isinstance(report, SweepReport):
                _sweep_axes(ax, report)
            else:
                raise TypeError(f"cannot chart {type(report).__name__}")
            fig.tight_layout()
            fig.savefig(path, format="svg", metadata=_METADATA)
        except OSError as exc:
            raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from None
        finally:
            plt.close(fig)
    return path
