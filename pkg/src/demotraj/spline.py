"""Clamped B-spline curves with exact derivatives and duration scaling.

Curves are parameterized by normalized time s in [0, 1] and paired with a
duration to form executable trajectories: the r-th time derivative equals
the r-th normalized derivative divided by duration**r.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "KnotVector",
    "BSplineCurve",
    "TimedTrajectory",
    "make_clamped_knots",
    "basis",
    "evaluate",
    "eval_derivative",
    "derivative_control_bounds",
    "basis_matrix",
    "derivative_matrix",
    "trajectory_to_json",
    "trajectory_from_json",
]


@dataclass(frozen=True)
class KnotVector:
    """Non-decreasing knots in [0, 1], clamped: k-fold 0 at the start, k-fold 1 at the end."""

    knots: np.ndarray
    order: int

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", knots)
        k = self.order
        if k < 2:
            raise ValueError(f"order must be at least 2, got {k}")
        if knots.ndim != 1 or knots.size < 2 * k:
            raise ValueError("knot vector too short for the given order")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be non-decreasing")
        if not (np.all(knots[:k] == 0.0) and np.all(knots[-k:] == 1.0)):
            raise ValueError("knot vector is not clamped to [0, 1]")

    @property
    def num_control_points(self) -> int:
        return self.knots.size - self.order


@dataclass(frozen=True)
class BSplineCurve:
    """Linear combination of control points weighted by B-spline basis functions."""

    control_points: np.ndarray  # (n_ctrl, dim)
    knots: KnotVector

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.control_points, dtype=float))
        object.__setattr__(self, "control_points", P)
        if P.shape[0] != self.knots.num_control_points:
            raise ValueError(
                f"{P.shape[0]} control points but knot vector implies "
                f"{self.knots.num_control_points}"
            )
        if P.shape[0] < self.knots.order:
            raise ValueError("need at least `order` control points")

    @property
    def dim(self) -> int:
        return self.control_points.shape[1]


@dataclass(frozen=True)
class TimedTrajectory:
    """A normalized curve plus the duration that maps s in [0,1] to real seconds."""

    curve: BSplineCurve
    duration: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("duration must be positive")

    def sample(self, t: float) -> np.ndarray:
        return evaluate(self.curve, t / self.duration)

    def derivative(self, t: float, r: int) -> np.ndarray:
        """r-th derivative with respect to real time at t."""
        return eval_derivative(self.curve, t / self.duration, r) / self.duration**r


def make_clamped_knots(n_ctrl: int, order: int) -> KnotVector:
    """Clamped knot vector with uniformly spaced interior knots."""
    if order < 2:
        raise ValueError(f"order must be at least 2, got {order}")
    if n_ctrl < order:
        raise ValueError(f"need at least {order} control points, got {n_ctrl}")
    n_interior = n_ctrl - order
    interior = np.arange(1, n_interior + 1) / (n_interior + 1)
    knots = np.concatenate([np.zeros(order), interior, np.ones(order)])
    return KnotVector(knots, order)


def _basis_matrix_raw(knots: np.ndarray, order: int, s: np.ndarray) -> np.ndarray:
    """Collocation matrix N[q, i] = N_{i,order}(s_q) for a raw knot array.

    Accepts order >= 1 so derivative splines (down to piecewise constants)
    can be evaluated through the same recursion. The 0/0 convention maps to
    0 and the evaluation interval is closed at s = 1.
    """
    s = np.asarray(s, dtype=float)
    u = knots
    n_spans = u.size - 1
    N = np.zeros((s.size, n_spans))
    for i in range(n_spans):
        if u[i] < u[i + 1]:
            N[:, i] = np.where((u[i] <= s) & (s < u[i + 1]), 1.0, 0.0)
    at_end = s >= u[-1]
    if np.any(at_end):
        last = int(np.max(np.nonzero(np.diff(u) > 0)[0]))
        N[at_end, :] = 0.0
        N[at_end, last] = 1.0
    for p in range(2, order + 1):
        Nn = np.zeros((s.size, u.size - p))
        for i in range(u.size - p):
            left = u[i + p - 1] - u[i]
            right = u[i + p] - u[i + 1]
            acc = 0.0
            if left > 0:
                acc = (s - u[i]) / left * N[:, i]
            if right > 0:
                acc = acc + (u[i + p] - s) / right * N[:, i + 1]
            Nn[:, i] = acc
        N = Nn
    return N


def basis_matrix(kv: KnotVector, s) -> np.ndarray:
    """Matrix of all basis values at the given parameter(s), shape (len(s), n_ctrl)."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    _check_domain(s)
    return _basis_matrix_raw(kv.knots, kv.order, s)


def basis(i: int, k: int, s: float, knots: KnotVector) -> float:
    """Single Cox-de Boor basis value N_{i,k}(s); i is zero-based."""
    if k != knots.order:
        raise ValueError("k must match the knot vector order")
    if not 0 <= i < knots.num_control_points:
        raise ValueError(f"basis index {i} out of range")
    row = basis_matrix(knots, s)
    return float(row[0, i])


def _check_domain(s: np.ndarray) -> None:
    if np.any(s < 0.0) or np.any(s > 1.0):
        raise ValueError("parameter s outside [0, 1]")


def evaluate(curve: BSplineCurve, s) -> np.ndarray:
    """Curve point at normalized time s (vector), or (len(s), dim) for arrays."""
    scalar = np.isscalar(s)
    N = basis_matrix(curve.knots, s)
    out = N @ curve.control_points
    return out[0] if scalar else out


def _derivative_data(curve: BSplineCurve, r: int):
    """Control points, knot array, and order of the r-th derivative spline."""
    k = curve.knots.order
    if not 0 <= r <= k - 1:
        raise ValueError(f"derivative order r={r} not in [0, {k - 1}]")
    P = curve.control_points
    u = curve.knots.knots
    order = k
    for _ in range(r):
        P = _diff_once(P, u, order)
        u = u[1:-1]
        order -= 1
    return P, u, order


def _diff_once(P: np.ndarray, u: np.ndarray, order: int) -> np.ndarray:
    denom = u[order : order + P.shape[0] - 1] - u[1 : P.shape[0]]
    scale = np.where(denom > 0, (order - 1) / np.where(denom > 0, denom, 1.0), 0.0)
    return scale[:, None] * (P[1:] - P[:-1])


def eval_derivative(curve: BSplineCurve, s, r: int) -> np.ndarray:
    """r-th derivative with respect to normalized time, via the derivative spline."""
    scalar = np.isscalar(s)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    _check_domain(s)
    P, u, order = _derivative_data(curve, r)
    N = _basis_matrix_raw(u, order, s)
    out = N @ P
    return out[0] if scalar else out


def derivative_control_bounds(curve: BSplineCurve, r: int) -> tuple[np.ndarray, np.ndarray]:
    """Component-wise bounds on the r-th normalized derivative over s in [0, 1].

    Convex-hull property of the derivative spline's control points; the true
    range is always contained in (lower, upper).
    """
    P, _, _ = _derivative_data(curve, r)
    return P.min(axis=0), P.max(axis=0)


def derivative_matrix(kv: KnotVector, r: int) -> np.ndarray:
    """Matrix D with: r-th derivative spline control points = D @ control points."""
    k = kv.order
    if not 0 <= r <= k - 1:
        raise ValueError(f"derivative order r={r} not in [0, {k - 1}]")
    n = kv.num_control_points
    D = np.eye(n)
    u = kv.knots
    order = k
    for _ in range(r):
        m = D.shape[0]
        denom = u[order : order + m - 1] - u[1:m]
        scale = np.where(denom > 0, (order - 1) / np.where(denom > 0, denom, 1.0), 0.0)
        D = scale[:, None] * (D[1:] - D[:-1])
        u = u[1:-1]
        order -= 1
    return D


def _fmt(x: float) -> str:
    # 17 significant digits: round-trips IEEE doubles exactly
    return format(float(x), ".17g")


def trajectory_to_json(traj: TimedTrajectory) -> str:
    kv = traj.curve.knots
    knots = ", ".join(_fmt(x) for x in kv.knots)
    rows = ",\n    ".join(
        "[" + ", ".join(_fmt(v) for v in row) + "]" for row in traj.curve.control_points
    )
    return (
        "{\n"
        f'  "order": {kv.order},\n'
        f'  "knots": [{knots}],\n'
        f'  "control_points": [\n    {rows}\n  ],\n'
        f'  "duration_s": {_fmt(traj.duration)}\n'
        "}\n"
    )


def trajectory_from_json(text: str) -> TimedTrajectory:
    doc = json.loads(text)
    return trajectory_from_dict(doc)


def trajectory_from_dict(doc: dict) -> TimedTrajectory:
    kv = KnotVector(np.asarray(doc["knots"], dtype=float), int(doc["order"]))
    curve = BSplineCurve(np.asarray(doc["control_points"], dtype=float), kv)
    return TimedTrajectory(curve, float(doc["duration_s"]))
