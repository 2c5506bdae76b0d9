"""Demonstration recording I/O, waypoint extraction, and synthetic demos.

Recordings are plain CSV (t, q1..qn) with a JSON sidecar carrying the sample
rate and model name. The synthetic generator stands in for hands-on guidance
of a physical arm: a smooth minimum-jerk sweep through a joint-space skeleton
plus seeded Gaussian noise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from . import kin
from .kin import Pose, RobotModel

__all__ = [
    "DemoRecording",
    "Waypoint",
    "SynthSpec",
    "extract_waypoints",
    "differentiate_noncausal",
    "synth_demo",
    "write_recording",
    "read_recording",
]


@dataclass(frozen=True)
class DemoRecording:
    """Timestamped joint samples at a nominal rate."""

    rate_hz: float
    t: np.ndarray  # (N,)
    q: np.ndarray  # (N, n)
    model_name: str = ""

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        q = np.atleast_2d(np.asarray(self.q, dtype=float))
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "q", q)
        if t.size < 2:
            raise ValueError("recording needs at least 2 samples")
        if np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if q.shape[0] != t.size:
            raise ValueError("t and q disagree on sample count")

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    @property
    def dof(self) -> int:
        return self.q.shape[1]


@dataclass(frozen=True)
class Waypoint:
    """Joint configuration plus the end-effector pose it maps to."""

    index: int
    Q: np.ndarray
    pose: Pose

    @property
    def p(self) -> np.ndarray:
        return self.pose.p

    @property
    def theta(self) -> np.ndarray:
        return self.pose.theta


def extract_waypoints(rec: DemoRecording, model: RobotModel,
                      pos_thresh: float, ang_thresh: float) -> list[Waypoint]:
    """Threshold-based decimation of a recording into waypoints.

    The first sample is always kept; a sample becomes the next waypoint once
    the end-effector moved at least pos_thresh in position or ang_thresh in
    angle since the last accepted waypoint. The final sample is always kept
    so the goal survives (deduplicated when it was just accepted).
    """
    if pos_thresh <= 0 or ang_thresh <= 0:
        raise ValueError("thresholds must be positive")
    if rec.q.shape[1] != model.dof:
        raise ValueError("recording and model disagree on joint count")
    poses = [kin.fk(model, qi) for qi in rec.q]
    keep = [0]
    last = poses[0]
    for i in range(1, len(poses)):
        dp = float(np.linalg.norm(poses[i].p - last.p))
        da = kin.quat_diff(poses[i].theta, last.theta)
        if dp >= pos_thresh or da >= ang_thresh:
            keep.append(i)
            last = poses[i]
    final = len(poses) - 1
    if keep[-1] != final:
        if np.array_equal(rec.q[final], rec.q[keep[-1]]):
            pass  # identical configuration: already represented
        else:
            keep.append(final)
    return [Waypoint(j, rec.q[i].copy(), poses[i]) for j, i in enumerate(keep)]


def differentiate_noncausal(rec: DemoRecording):
    """First three time derivatives: central differences inside, one-sided at the ends."""
    if rec.t.size < 4:
        raise ValueError("need at least 4 samples to differentiate")
    dq = np.gradient(rec.q, rec.t, axis=0)
    ddq = np.gradient(dq, rec.t, axis=0)
    dddq = np.gradient(ddq, rec.t, axis=0)
    return dq, ddq, dddq


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of a synthetic noisy demonstration."""

    skeleton: np.ndarray  # (M, n) joint-space path to sweep through
    duration: float
    noise_std: float = 0.0
    rate_hz: float = 10.0
    seed: int = 0
    model_name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "skeleton", np.atleast_2d(np.asarray(self.skeleton, dtype=float)))
        if self.duration <= 0 or self.rate_hz <= 0:
            raise ValueError("duration and rate must be positive")
        if self.skeleton.shape[0] < 2:
            raise ValueError("skeleton needs at least 2 configurations")


def skeleton_path(spec: SynthSpec, t: np.ndarray) -> np.ndarray:
    """Noise-free demo path: clamped cubic through the skeleton, minimum-jerk time warp."""
    M = spec.skeleton.shape[0]
    spl = CubicSpline(np.linspace(0.0, 1.0, M), spec.skeleton, bc_type="clamped")
    u = np.clip(t / spec.duration, 0.0, 1.0)
    # quintic minimum-jerk scaling: rest-to-rest, zero boundary accel
    w = u**3 * (10.0 - 15.0 * u + 6.0 * u**2)
    return spl(w)


def synth_demo(spec: SynthSpec) -> DemoRecording:
    """Sampled sweep through the skeleton plus i.i.d. Gaussian joint noise."""
    n_samples = int(round(spec.duration * spec.rate_hz)) + 1
    t = np.arange(n_samples) / spec.rate_hz
    q = skeleton_path(spec, t)
    if spec.noise_std > 0:
        rng = np.random.default_rng(spec.seed)
        q = q + rng.normal(0.0, spec.noise_std, size=q.shape)
    return DemoRecording(spec.rate_hz, t, q, spec.model_name)


def write_recording(path: str | Path, rec: DemoRecording) -> None:
    path = Path(path)
    n = rec.dof
    header = "t," + ",".join(f"q{i + 1}" for i in range(n))
    rows = [header]
    for ti, qi in zip(rec.t, rec.q):
        rows.append(",".join(format(v, ".17g") for v in (ti, *qi)))
    path.write_text("\n".join(rows) + "\n")
    sidecar = {"rate_hz": rec.rate_hz, "model": rec.model_name}
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n")


def read_recording(path: str | Path) -> DemoRecording:
    path = Path(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    sidecar_path = path.with_suffix(".json")
    rate_hz, model_name = 10.0, ""
    if sidecar_path.exists():
        sidecar = json.loads(sidecar_path.read_text())
        rate_hz = float(sidecar.get("rate_hz", rate_hz))
        model_name = sidecar.get("model", "")
    return DemoRecording(rate_hz, data[:, 0], data[:, 1:], model_name)
