"""Serial-chain kinematics: modified-DH forward kinematics, quaternion
angle distance, and joint limit bookkeeping.

Models are immutable after loading; limit vectors live in JSON model files,
not in source.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

__all__ = [
    "KinematicLimits",
    "RobotModel",
    "Pose",
    "LimitViolation",
    "fk",
    "quat_diff",
    "check_limits",
    "load_model",
    "model_from_dict",
    "model_to_dict",
]

BANDS = ("pos", "vel", "acc", "jerk")


@dataclass(frozen=True)
class KinematicLimits:
    """Per-joint bounds for position, velocity, acceleration, and jerk."""

    q_min: np.ndarray
    q_max: np.ndarray
    v_min: np.ndarray
    v_max: np.ndarray
    a_min: np.ndarray
    a_max: np.ndarray
    j_min: np.ndarray
    j_max: np.ndarray

    def __post_init__(self):
        n = None
        for name in ("q_min", "q_max", "v_min", "v_max", "a_min", "a_max", "j_min", "j_max"):
            v = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, v)
            if n is None:
                n = v.size
            elif v.size != n:
                raise ValueError("limit vectors must all have the same length")
        for lo, hi in ((self.q_min, self.q_max), (self.v_min, self.v_max),
                       (self.a_min, self.a_max), (self.j_min, self.j_max)):
            if np.any(lo > hi):
                raise ValueError("limit band has min > max")
        # derivative bands must allow rest; a zero-width band is representable
        # (it makes downstream solves report infeasible rather than crash)
        for lo, hi in ((self.v_min, self.v_max), (self.a_min, self.a_max),
                       (self.j_min, self.j_max)):
            if np.any(lo > 0) or np.any(hi < 0):
                raise ValueError("velocity/acceleration/jerk bands must contain 0")

    @property
    def dof(self) -> int:
        return self.q_min.size

    def band(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        lo = {"pos": self.q_min, "vel": self.v_min, "acc": self.a_min, "jerk": self.j_min}
        hi = {"pos": self.q_max, "vel": self.v_max, "acc": self.a_max, "jerk": self.j_max}
        return lo[name], hi[name]


@dataclass(frozen=True)
class RobotModel:
    """Serial chain in modified-DH convention with an optional fixed tool transform."""

    name: str
    dh_rows: np.ndarray  # (n, 4): a [m], d [m], alpha [rad], theta_offset [rad]
    limits: KinematicLimits
    tool: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.dh_rows, dtype=float))
        object.__setattr__(self, "dh_rows", rows)
        object.__setattr__(self, "tool", np.asarray(self.tool, dtype=float))
        if rows.shape[0] < 1 or rows.shape[1] != 4:
            raise ValueError("dh_rows must be (n, 4) with n >= 1")
        if rows.shape[0] != self.limits.dof:
            raise ValueError("dh_rows and limit vectors disagree on joint count")
        if self.tool.shape != (4, 4):
            raise ValueError("tool transform must be 4x4")

    @property
    def dof(self) -> int:
        return self.dh_rows.shape[0]


@dataclass(frozen=True)
class Pose:
    """End-effector position plus unit quaternion with canonical (w >= 0) sign."""

    p: np.ndarray
    theta: np.ndarray  # (w, x, y, z)

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        theta = np.asarray(self.theta, dtype=float)
        if p.shape != (3,) or theta.shape != (4,):
            raise ValueError("Pose needs p of shape (3,) and theta of shape (4,)")
        norm = np.linalg.norm(theta)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"quaternion norm deviates by {abs(norm - 1.0):.2e}")
        theta = _canonical_sign(theta)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "theta", theta)


@dataclass(frozen=True)
class LimitViolation:
    joint: int
    band: str  # one of BANDS
    amount: float  # how far outside the band


def _canonical_sign(q: np.ndarray) -> np.ndarray:
    for c in q:
        if c > 0:
            return q
        if c < 0:
            return -q
    return q


def _dh_transform(a: float, d: float, alpha: float, theta: float) -> np.ndarray:
    ct, st = math.cos(theta), math.sin(theta)
    ca, sa = math.cos(alpha), math.sin(alpha)
    return np.array([
        [ct, -st, 0.0, a],
        [st * ca, ct * ca, -sa, -d * sa],
        [st * sa, ct * sa, ca, d * ca],
        [0.0, 0.0, 0.0, 1.0],
    ])


def _dh_transform_dtheta(a: float, d: float, alpha: float, theta: float) -> np.ndarray:
    ct, st = math.cos(theta), math.sin(theta)
    ca, sa = math.cos(alpha), math.sin(alpha)
    return np.array([
        [-st, -ct, 0.0, 0.0],
        [ct * ca, -st * ca, 0.0, 0.0],
        [ct * sa, -st * sa, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0],
    ])


def _quat_from_matrix(R: np.ndarray) -> np.ndarray:
    # Shepperd's method: pick the numerically largest component first
    t = np.trace(R)
    if t > 0:
        w = 0.5 * math.sqrt(1.0 + t)
        s = 0.25 / w
        q = np.array([w, (R[2, 1] - R[1, 2]) * s, (R[0, 2] - R[2, 0]) * s,
                      (R[1, 0] - R[0, 1]) * s])
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        x = 0.5 * math.sqrt(max(1.0 + R[i, i] - R[j, j] - R[k, k], 0.0))
        s = 0.25 / x
        q = np.empty(4)
        q[0] = (R[k, j] - R[j, k]) * s
        q[1 + i] = x
        q[1 + j] = (R[j, i] + R[i, j]) * s
        q[1 + k] = (R[k, i] + R[i, k]) * s
    q = q / np.linalg.norm(q)
    return _canonical_sign(q)


def fk(model: RobotModel, q: np.ndarray) -> Pose:
    """End-effector pose of the chained modified-DH transforms (tool included)."""
    q = np.asarray(q, dtype=float)
    if q.shape != (model.dof,):
        raise ValueError(f"expected {model.dof} joint values, got shape {q.shape}")
    T = np.eye(4)
    for (a, d, alpha, off), qi in zip(model.dh_rows, q):
        T = T @ _dh_transform(a, d, alpha, qi + off)
    T = T @ model.tool
    return Pose(T[:3, 3].copy(), _quat_from_matrix(T[:3, :3]))


def fk_matrix(model: RobotModel, q: np.ndarray) -> np.ndarray:
    """Full 4x4 end-effector transform."""
    q = np.asarray(q, dtype=float)
    T = np.eye(4)
    for (a, d, alpha, off), qi in zip(model.dh_rows, q):
        T = T @ _dh_transform(a, d, alpha, qi + off)
    return T @ model.tool


def quat_diff(a: np.ndarray, b: np.ndarray) -> float:
    """Absolute rotation angle between two unit quaternions, in [0, pi].

    Equals 2*arccos(|<a, b>|); computed through the smaller chord, which is
    exact at 0 and well conditioned where arccos is not.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    for q in (a, b):
        if q.shape != (4,):
            raise ValueError("quaternions must have shape (4,)")
        if abs(np.linalg.norm(q) - 1.0) > 1e-6:
            raise ValueError("quaternion is not unit length")
    chord = min(float(np.linalg.norm(a - b)), float(np.linalg.norm(a + b)))
    return 4.0 * math.asin(min(0.5 * chord, 1.0))


def check_limits(model: RobotModel, q, dq, ddq, dddq) -> list[LimitViolation]:
    """Violations of the four kinematic bands at a single state; empty if feasible."""
    out: list[LimitViolation] = []
    lim = model.limits
    for band, vec in zip(BANDS, (q, dq, ddq, dddq)):
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (model.dof,):
            raise ValueError(f"{band} vector has wrong length")
        lo, hi = lim.band(band)
        over = vec - hi
        under = lo - vec
        for j in range(model.dof):
            if over[j] > 0:
                out.append(LimitViolation(j, band, float(over[j])))
            elif under[j] > 0:
                out.append(LimitViolation(j, band, float(under[j])))
    return out


def batch_pose_with_grads(model: RobotModel, Q: np.ndarray, R_ref: np.ndarray):
    """Positions, orientation overlap, and their joint-space gradients, batched.

    Q: (m, n) joint configurations. R_ref: (m, 3, 3) target rotations.
    Returns (p (m,3), dp_dq (m,3,n), c2 (m,), dc2_dq (m,n)) where
    c2 = (trace(R_ref^T R) + 1) / 4 = cos^2(angle/2); smooth in q, no
    quaternion extraction branches, which keeps solver gradients clean.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    m, n = Q.shape
    if n != model.dof:
        raise ValueError("joint count mismatch")
    A = np.empty((n, m, 4, 4))
    dA = np.empty((n, m, 4, 4))
    for i, (a, d, alpha, off) in enumerate(model.dh_rows):
        th = Q[:, i] + off
        ct, st = np.cos(th), np.sin(th)
        ca, sa = math.cos(alpha), math.sin(alpha)
        Ai = np.zeros((m, 4, 4))
        Ai[:, 0, 0] = ct
        Ai[:, 0, 1] = -st
        Ai[:, 0, 3] = a
        Ai[:, 1, 0] = st * ca
        Ai[:, 1, 1] = ct * ca
        Ai[:, 1, 2] = -sa
        Ai[:, 1, 3] = -d * sa
        Ai[:, 2, 0] = st * sa
        Ai[:, 2, 1] = ct * sa
        Ai[:, 2, 2] = ca
        Ai[:, 2, 3] = d * ca
        Ai[:, 3, 3] = 1.0
        dAi = np.zeros((m, 4, 4))
        dAi[:, 0, 0] = -st
        dAi[:, 0, 1] = -ct
        dAi[:, 1, 0] = ct * ca
        dAi[:, 1, 1] = -st * ca
        dAi[:, 2, 0] = ct * sa
        dAi[:, 2, 1] = -st * sa
        A[i] = Ai
        dA[i] = dAi

    prefix = np.empty((n + 1, m, 4, 4))
    prefix[0] = np.eye(4)
    for i in range(n):
        prefix[i + 1] = prefix[i] @ A[i]
    suffix = np.empty((n + 1, m, 4, 4))
    suffix[n] = model.tool
    for i in range(n - 1, -1, -1):
        suffix[i] = A[i] @ suffix[i + 1]

    T = prefix[n] @ model.tool
    p = T[:, :3, 3].copy()
    R = T[:, :3, :3]
    c2 = (np.einsum("mij,mij->m", R_ref, R) + 1.0) / 4.0

    dp_dq = np.empty((m, 3, n))
    dc2_dq = np.empty((m, n))
    for i in range(n):
        dT = prefix[i] @ dA[i] @ suffix[i + 1]
        dp_dq[:, :, i] = dT[:, :3, 3]
        dc2_dq[:, i] = np.einsum("mij,mij->m", R_ref, dT[:, :3, :3]) / 4.0
    return p, dp_dq, c2, dc2_dq


def model_to_dict(model: RobotModel) -> dict:
    d = {
        "name": model.name,
        "convention": "modified_dh",
        "joints": [
            {"a": a, "d": dd, "alpha": al, "theta_offset": off}
            for a, dd, al, off in model.dh_rows
        ],
        "limits": {
            "q_min": model.limits.q_min.tolist(),
            "q_max": model.limits.q_max.tolist(),
            "v_min": model.limits.v_min.tolist(),
            "v_max": model.limits.v_max.tolist(),
            "a_min": model.limits.a_min.tolist(),
            "a_max": model.limits.a_max.tolist(),
            "j_min": model.limits.j_min.tolist(),
            "j_max": model.limits.j_max.tolist(),
        },
    }
    if not np.allclose(model.tool, np.eye(4)):
        d["tool"] = model.tool.tolist()
    return d


def model_from_dict(doc: dict) -> RobotModel:
    if doc.get("convention", "modified_dh") != "modified_dh":
        raise ValueError(f"unsupported DH convention {doc.get('convention')!r}")
    rows = np.array([[j["a"], j["d"], j["alpha"], j.get("theta_offset", 0.0)]
                     for j in doc["joints"]])
    lim = doc["limits"]
    limits = KinematicLimits(
        lim["q_min"], lim["q_max"], lim["v_min"], lim["v_max"],
        lim["a_min"], lim["a_max"], lim["j_min"], lim["j_max"],
    )
    tool = np.asarray(doc.get("tool", np.eye(4)), dtype=float)
    return RobotModel(doc.get("name", "unnamed"), rows, limits, tool)


def load_model(name_or_path: str) -> RobotModel:
    """Load a model JSON file; bare names resolve to the bundled models."""
    if name_or_path.endswith(".json"):
        with open(name_or_path) as f:
            return model_from_dict(json.load(f))
    ref = resources.files("demotraj.models").joinpath(f"{name_or_path}.json")
    with ref.open() as f:
        return model_from_dict(json.load(f))
