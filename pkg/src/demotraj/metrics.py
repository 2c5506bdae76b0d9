"""Comparison metrics: normalized jerk, limit violations, report table.

The jerk metric is the maximum absolute third derivative with respect to
normalized time s in [0, 1], which makes trajectories of different durations
comparable: rescaling the duration of the same path leaves it unchanged.
Recordings are differentiated non-causally (same differentiation as ingest)
and converted to normalized time by the cubed duration.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import ingest, spline
from .dmp import DmpRollout
from .ingest import DemoRecording
from .kin import RobotModel
from .spline import TimedTrajectory

__all__ = ["ComparisonReport", "ViolationInterval", "manj", "violations", "report",
           "report_to_csv", "report_from_csv"]

FORMAT_VERSION = 1


def manj(traj, grid_n: int = 10_000) -> float:
    """Maximum absolute normalized jerk: max over joints and s of |d^3 q / d s^3|."""
    if isinstance(traj, TimedTrajectory):
        s = np.linspace(0.0, 1.0, grid_n)
        d3 = _spline_derivative(traj.curve, s, 3)
        return float(np.max(np.abs(d3)))
    if isinstance(traj, DmpRollout):
        return float(np.max(np.abs(traj.yddd)) * traj.duration**3)
    if isinstance(traj, DemoRecording):
        if traj.t.size < 4:
            raise ValueError("need at least 4 samples")
        _, _, dddq = ingest.differentiate_noncausal(traj)
        return float(np.max(np.abs(dddq)) * traj.duration**3)
    raise TypeError(f"cannot compute the jerk metric for {type(traj).__name__}")


@dataclass(frozen=True)
class ViolationInterval:
    joint: int
    band: str
    t_start: float
    t_end: float
    peak: float  # worst excess within the interval


def _spline_derivative(curve, s, r):
    # beyond the polynomial degree the derivative vanishes identically
    if r > curve.knots.order - 1:
        return np.zeros((s.size, curve.dim))
    return spline.eval_derivative(curve, s, r)


def _kinematic_samples(traj, dt: float):
    if isinstance(traj, TimedTrajectory):
        T = traj.duration
        N = max(int(np.ceil(T / dt)), 2) + 1
        t = np.linspace(0.0, T, N)
        s = t / T
        q = spline.evaluate(traj.curve, s)
        dq = _spline_derivative(traj.curve, s, 1) / T
        ddq = _spline_derivative(traj.curve, s, 2) / T**2
        dddq = _spline_derivative(traj.curve, s, 3) / T**3
        return t, q, dq, ddq, dddq
    if isinstance(traj, DmpRollout):
        return traj.t, traj.y, traj.yd, traj.ydd, traj.yddd
    if isinstance(traj, DemoRecording):
        dq, ddq, dddq = ingest.differentiate_noncausal(traj)
        return traj.t, traj.q, dq, ddq, dddq
    raise TypeError(f"cannot sample kinematics of {type(traj).__name__}")


def violations(traj, model: RobotModel, dt: float = 1e-3) -> list[ViolationInterval]:
    """Joint-limit violations at dense sampling, merged into contiguous intervals."""
    t, q, dq, ddq, dddq = _kinematic_samples(traj, dt)
    lim = model.limits
    out: list[ViolationInterval] = []
    for band, val in (("pos", q), ("vel", dq), ("acc", ddq), ("jerk", dddq)):
        lo, hi = lim.band(band)
        excess = np.maximum(val - hi, lo - val)  # (N, n), positive where violating
        for j in range(model.dof):
            bad = excess[:, j] > 0
            if not np.any(bad):
                continue
            edges = np.flatnonzero(np.diff(bad.astype(int)))
            starts = [0] if bad[0] else []
            starts += list(edges[~bad[edges]] + 1)
            ends = list(edges[bad[edges]] + 1)
            if bad[-1]:
                ends.append(bad.size)
            for a, b in zip(starts, ends):
                out.append(ViolationInterval(
                    j, band, float(t[a]), float(t[b - 1]),
                    float(np.max(excess[a:b, j]))))
    return out


@dataclass(frozen=True)
class ComparisonReport:
    rows: list[tuple[str, float, float, int]]  # (label, time_s, manj, violation_count)
    version: int = FORMAT_VERSION

    def __post_init__(self):
        if not self.rows:
            raise ValueError("report needs at least one row")
        if any(r[1] <= 0 for r in self.rows):
            raise ValueError("durations must be positive")

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "rows": [
                {"label": l, "time_s": t, "manj": m, "violations": v}
                for l, t, m, v in self.rows
            ],
        }


def report(entries: list[tuple[str, object]], model: RobotModel,
           dt: float = 1e-3, grid_n: int = 10_000) -> ComparisonReport:
    """Duration, jerk metric, and violation count per labeled trajectory."""
    rows = []
    for label, traj in entries:
        duration = float(traj.duration)
        rows.append((label, duration, manj(traj, grid_n),
                     len(violations(traj, model, dt))))
    return ComparisonReport(rows)


def report_to_csv(rep: ComparisonReport) -> str:
    buf = io.StringIO()
    buf.write("label,time_s,manj,violations\n")
    for label, t, m, v in rep.rows:
        buf.write(f"{label},{t:.17g},{m:.17g},{v}\n")
    return buf.getvalue()


def report_from_csv(text: str) -> ComparisonReport:
    lines = [ln for ln in text.strip().splitlines() if ln]
    if not lines or lines[0] != "label,time_s,manj,violations":
        raise ValueError("not a comparison report CSV")
    rows = []
    for ln in lines[1:]:
        label, t, m, v = ln.split(",")
        rows.append((label, float(t), float(m), int(v)))
    return ComparisonReport(rows)
