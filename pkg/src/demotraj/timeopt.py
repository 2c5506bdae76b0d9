"""Minimum-time retiming through all waypoints under position/velocity bounds.

One cubic spline segment per waypoint pair. Interpolation, junction velocity
continuity, and rest boundary conditions are eliminated analytically by
parameterizing each segment in Hermite form: the decision variables are
junction velocities and segment durations, and every remaining constraint is
smooth in those variables.

Acceleration and jerk limits are deliberately not enforced here: the noisy
path would block any useful timing. The output is the normalized schedule
tau_i used by the trajectory generation stage.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nlp, spline
from .errors import InfeasibleProblem
from .ingest import Waypoint
from .kin import RobotModel

__all__ = ["TimingResult", "TimeOptOptions", "solve_timing", "subdivision_matrix"]

_T_FLOOR = 1e-3  # avoids division blow-ups in the time scaling


@dataclass(frozen=True)
class TimingResult:
    """Per-segment durations and curves plus the normalized waypoint schedule."""

    segment_durations: np.ndarray  # (m-1,)
    segment_curves: list[spline.BSplineCurve]
    tau: np.ndarray  # (m,), tau[0] = 0, tau[-1] = 1, strictly increasing

    def __post_init__(self):
        T = np.asarray(self.segment_durations, dtype=float)
        tau = np.asarray(self.tau, dtype=float)
        object.__setattr__(self, "segment_durations", T)
        object.__setattr__(self, "tau", tau)
        if np.any(T <= 0):
            raise ValueError("segment durations must be positive")
        if tau[0] != 0.0 or tau[-1] != 1.0 or np.any(np.diff(tau) <= 0):
            raise ValueError("tau must increase strictly from 0 to 1")

    @property
    def total_duration(self) -> float:
        return float(np.sum(self.segment_durations))

    def to_dict(self) -> dict:
        return {
            "tau": self.tau.tolist(),
            "segment_durations": self.segment_durations.tolist(),
            "total_s": self.total_duration,
        }


@dataclass
class TimeOptOptions:
    solver: nlp.SolverOptions = field(default_factory=lambda: nlp.SolverOptions(opt_tol=1e-4))
    subdivision_depth: int = 2  # hull-bound tightening; still a sufficient condition
    limit_margin: float = 1e-4  # relative shrink so dense sampling stays clean


def subdivision_matrix(degree: int, depth: int) -> np.ndarray:
    """Stacked de Casteljau half-splits: control points of all 2**depth pieces.

    Each piece's control polygon still bounds its arc (convex hull property),
    so the stacked values give a guaranteed but much tighter range bound than
    the undivided polygon.
    """
    m = degree + 1
    L = np.zeros((m, m))
    R = np.zeros((m, m))
    for i in range(m):
        # rows of iterated midpoint averaging = binomial weights / 2^i
        for j in range(i + 1):
            c = _binom(i, j) / 2.0**i
            L[i, j] = c
            R[m - 1 - i, m - 1 - j] = c
    blocks = [np.eye(m)]
    for _ in range(depth):
        blocks = [half @ b for b in blocks for half in (L, R)]
    return np.vstack(blocks)


def _binom(n: int, k: int) -> float:
    out = 1.0
    for i in range(k):
        out = out * (n - i) / (i + 1)
    return out


def solve_timing(wps: list[Waypoint], model: RobotModel, order: int = 4,
                 ctrl_per_segment: int = 4,
                 opts: TimeOptOptions | None = None) -> TimingResult:
    """Minimize total duration subject to position/velocity bounds.

    Segments interpolate their waypoint endpoints exactly, junction velocities
    are continuous, and the trajectory starts and ends at rest, all by
    construction of the Hermite parameterization.
    """
    if order != 4 or ctrl_per_segment != 4:
        raise ValueError("only order=4 with 4 control points per segment is supported")
    opts = opts or TimeOptOptions()
    m = len(wps)
    if m < 2:
        raise ValueError("need at least 2 waypoints")
    n = model.dof
    Q = np.array([w.Q for w in wps])
    if Q.shape[1] != n:
        raise ValueError("waypoints and model disagree on joint count")

    lim = model.limits
    mar = opts.limit_margin
    q_lo = lim.q_min + mar * (lim.q_max - lim.q_min)
    q_hi = lim.q_max - mar * (lim.q_max - lim.q_min)
    v_lo = lim.v_min * (1.0 - mar)
    v_hi = lim.v_max * (1.0 - mar)

    if np.any(Q < lim.q_min) or np.any(Q > lim.q_max):
        raise InfeasibleProblem("waypoint outside joint position limits")
    dQ = np.diff(Q, axis=0)  # (m-1, n)
    if np.any((dQ > 0) & (v_hi <= 0)) or np.any((dQ < 0) & (v_lo >= 0)):
        raise InfeasibleProblem("velocity band cannot produce the required motion")

    S = subdivision_matrix(2, opts.subdivision_depth)  # velocity spline is quadratic
    R = S.shape[0]
    n_seg = m - 1
    n_jun = m - 2  # interior junction velocities; boundaries are at rest
    nv = n_jun * n

    def unpack(x):
        v = x[:nv].reshape(n_jun, n) if n_jun else np.zeros((0, n))
        T = x[nv:]
        return v, T

    def vel_ends(v):
        # per-segment start/end velocities including the rest boundaries
        vfull = np.vstack([np.zeros(n), v, np.zeros(n)]) if n_jun else np.zeros((2, n))
        return vfull[:-1], vfull[1:]  # (n_seg, n) each

    def constraints(x):
        v, T = unpack(x)
        vl, vr = vel_ends(v)
        # normalized-velocity control points of each cubic segment
        D = np.stack([T[:, None] * vl,
                      3.0 * dQ - T[:, None] * (vl + vr),
                      T[:, None] * vr], axis=1)  # (n_seg, 3, n)
        W = np.einsum("rk,skn->srn", S, D)  # (n_seg, R, n)
        g_vel_up = W - T[:, None, None] * v_hi
        g_vel_lo = T[:, None, None] * v_lo - W
        P2 = Q[:-1] + T[:, None] * vl / 3.0
        P3 = Q[1:] - T[:, None] * vr / 3.0
        g_pos = np.concatenate([
            (P2 - q_hi).ravel(), (q_lo - P2).ravel(),
            (P3 - q_hi).ravel(), (q_lo - P3).ravel(),
        ])
        return np.concatenate([g_vel_up.ravel(), g_vel_lo.ravel(), g_pos])

    n_vel = n_seg * R * n
    blk = n_seg * n

    def jtv(x, w):
        """J^T w, fully vectorized over segments (rows grouped as in constraints)."""
        v, T = unpack(x)
        vl, vr = vel_ends(v)
        w_up = w[:n_vel].reshape(n_seg, R, n)
        w_lo = w[n_vel:2 * n_vel].reshape(n_seg, R, n)
        pos = w[2 * n_vel:]
        w_p2 = (pos[:blk] - pos[blk:2 * blk]).reshape(n_seg, n)
        w_p3 = (pos[2 * blk:3 * blk] - pos[3 * blk:]).reshape(n_seg, n)

        w_W = w_up - w_lo
        w_D = np.einsum("srn,rk->skn", w_W, S)  # back through the subdivision
        g_vl = T[:, None] * (w_D[:, 0] - w_D[:, 1]) + T[:, None] * w_p2 / 3.0
        g_vr = T[:, None] * (w_D[:, 2] - w_D[:, 1]) - T[:, None] * w_p3 / 3.0
        g_T = (np.einsum("sn,sn->s", w_D[:, 0], vl)
               - np.einsum("sn,sn->s", w_D[:, 1], vl + vr)
               + np.einsum("sn,sn->s", w_D[:, 2], vr)
               - np.einsum("srn,n->s", w_up, v_hi)
               + np.einsum("srn,n->s", w_lo, v_lo)
               + np.einsum("sn,sn->s", w_p2, vl) / 3.0
               - np.einsum("sn,sn->s", w_p3, vr) / 3.0)
        out = np.empty(x.size)
        if n_jun:
            out[:nv] = (g_vl[1:1 + n_jun] + g_vr[:n_jun]).ravel()
        out[nv:] = g_T
        return out

    def objective(x):
        return float(np.sum(x[nv:]))

    def gradient(x):
        g = np.zeros(x.size)
        g[nv:] = 1.0
        return g

    # rest-to-rest start: v = 0 makes every constraint satisfiable by duration alone
    T0 = np.empty(n_seg)
    for s_i in range(n_seg):
        d = dQ[s_i]
        need_pos = np.where((d > 0) & (v_hi > 0), 3.0 * d / np.where(v_hi > 0, v_hi, 1.0), 0.0)
        need_neg = np.where((d < 0) & (v_lo < 0), 3.0 * d / np.where(v_lo < 0, v_lo, -1.0), 0.0)
        T0[s_i] = max(1.05 * float(np.max(np.maximum(need_pos, need_neg))), 10 * _T_FLOOR)
    x0 = np.concatenate([np.zeros(nv), T0])

    bounds = np.empty((nv + n_seg, 2))
    if nv:
        bounds[:nv, 0] = np.tile(v_lo, n_jun)
        bounds[:nv, 1] = np.tile(v_hi, n_jun)
    bounds[nv:, 0] = _T_FLOOR
    bounds[nv:, 1] = np.inf

    problem = nlp.Problem(
        dim=nv + n_seg,
        objective=objective,
        gradient=gradient,
        ineq_constraints=[nlp.Fn(constraints, jtv=jtv, name="timing bounds")],
        bounds=bounds,
    )
    sol = nlp.solve(problem, x0, opts.solver)
    if sol.status == "infeasible":
        raise InfeasibleProblem("timing problem infeasible",
                               {"max_violation": sol.constraint_violation})
    if sol.status not in ("converged", "max_iter"):
        raise InfeasibleProblem(f"timing solver failed: {sol.status} {sol.message}",
                               {"status": sol.status})
    if sol.status == "max_iter" and sol.constraint_violation > opts.solver.feas_tol:
        raise InfeasibleProblem("timing solver did not reach feasibility",
                               {"max_violation": sol.constraint_violation})

    v, T = unpack(sol.x)
    vl, vr = vel_ends(v)
    kv = spline.make_clamped_knots(4, 4)
    curves = []
    for s_i in range(n_seg):
        P = np.vstack([
            Q[s_i],
            Q[s_i] + T[s_i] * vl[s_i] / 3.0,
            Q[s_i + 1] - T[s_i] * vr[s_i] / 3.0,
            Q[s_i + 1],
        ])
        curves.append(spline.BSplineCurve(P, kv))
    total = float(np.sum(T))
    tau = np.concatenate([[0.0], np.cumsum(T) / total])
    tau[-1] = 1.0
    return TimingResult(T, curves, tau)
