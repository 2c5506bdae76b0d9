"""Figure rendering for the report path: profiles, comparisons, refinement.

All renderers write PNG files next to the delimited output and return the
paths they wrote. Kept separate from the metric computations, which stay
pure.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import metrics
from .kin import RobotModel
from .metrics import ComparisonReport
from .refine import RefinementTrace

__all__ = ["save_kinematic_profiles", "save_comparison_chart", "save_refinement_figure",
           "render_report_figures"]

_BAND_LABELS = (("pos", "position [rad]"), ("vel", "velocity [rad/s]"),
                ("acc", "acceleration [rad/s$^2$]"), ("jerk", "jerk [rad/s$^3$]"))


def save_kinematic_profiles(traj, model: RobotModel, path: str | Path,
                            title: str = "", dt: float = 1e-3) -> Path:
    """Joint position/velocity/acceleration/jerk vs time with limit lines."""
    t, q, dq, ddq, dddq = metrics._kinematic_samples(traj, dt)
    fig, axes = plt.subplots(4, 1, figsize=(7.0, 9.0), sharex=True)
    for ax, (band, ylabel), val in zip(axes, _BAND_LABELS, (q, dq, ddq, dddq)):
        ax.plot(t, val, lw=0.8)
        lo, hi = model.limits.band(band)
        ax.axhline(float(np.min(lo)), color="crimson", ls="--", lw=0.8)
        ax.axhline(float(np.max(hi)), color="crimson", ls="--", lw=0.8)
        ax.set_ylabel(ylabel)
        ax.grid(alpha=0.3)
    axes[-1].set_xlabel("time [s]")
    if title:
        axes[0].set_title(title)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def save_comparison_chart(report: ComparisonReport, path: str | Path) -> Path:
    """Side-by-side duration and normalized-jerk bars per report row."""
    labels = [r[0] for r in report.rows]
    times = [r[1] for r in report.rows]
    manjs = [r[2] for r in report.rows]
    viols = [r[3] for r in report.rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    xs = np.arange(len(labels))
    ax1.bar(xs, times, color="steelblue")
    ax1.set_ylabel("duration [s]")
    ax2.bar(xs, manjs, color=["indianred" if v else "seagreen" for v in viols])
    ax2.set_yscale("log")
    ax2.set_ylabel("max |normalized jerk| (log)")
    for ax in (ax1, ax2):
        ax.set_xticks(xs)
        ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
        ax.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def save_refinement_figure(trace: RefinementTrace, path: str | Path) -> Path:
    """Replay progression: unbraked clock vs s_r, speed, and filtered brake."""
    fig, axes = plt.subplots(3, 1, figsize=(7.0, 7.0), sharex=True)
    axes[0].plot(trace.t, trace.V0r * trace.t, ls="--", color="gray", label="no brake")
    axes[0].plot(trace.t, trace.s_r, color="steelblue", label="s_r(t)")
    axes[0].set_ylabel("normalized time")
    axes[0].set_ylim(0, 1.05)
    axes[0].legend(loc="lower right", fontsize=8)
    axes[1].plot(trace.t, trace.v, color="seagreen")
    axes[1].axhline(trace.Vminr, color="crimson", ls="--", lw=0.8)
    axes[1].set_ylabel("v [1/s]")
    axes[2].plot(trace.t, trace.C, color="lightgray", label="C")
    axes[2].plot(trace.t, trace.R, color="indianred", label="R")
    axes[2].set_ylabel("brake")
    axes[2].set_xlabel("replay time [s]")
    axes[2].legend(loc="lower right", fontsize=8)
    for ax in axes:
        ax.grid(alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def render_report_figures(entries, report: ComparisonReport, model: RobotModel,
                          outdir: str | Path, dt: float = 1e-3) -> list[Path]:
    """One profile figure per entry plus the comparison chart."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for label, traj in entries:
        safe = label.replace(" ", "_").replace("/", "_")
        written.append(save_kinematic_profiles(
            traj, model, outdir / f"profile_{safe}.png", title=label, dt=dt))
    written.append(save_comparison_chart(report, outdir / "comparison.png"))
    return written
