"""Jerk-regulated trajectory generation under full kinematic limits.

A single clamped B-spline over all waypoints with as many control points as
waypoints. Cost: weighted duration + integrated squared normalized jerk +
distance of control points from the demonstrated joint configurations (the
null-space anchor). Constraints: joint position/velocity/acceleration/jerk
bands through derivative control bounds scaled by the duration, exact
start/goal interpolation at rest, and per-waypoint end-effector boxes in
Cartesian position and orientation through forward kinematics.

Also the re-optimization entry used for fine-tuning after refinement: feed
the revised schedule and extracted tolerances, warm-started from the
previous solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kin, metrics, nlp, spline
from .errors import InfeasibleProblem
from .ingest import Waypoint
from .kin import RobotModel

__all__ = ["ToleranceProfile", "TrajGenConfig", "SmoothTrajectory", "generate", "verify"]

_T_FLOOR = 1e-3


@dataclass(frozen=True)
class ToleranceProfile:
    """Per-waypoint end-effector tolerances: position box half-widths and angle."""

    eps_p: np.ndarray  # (m, 3) meters
    eps_theta: np.ndarray  # (m,) radians

    def __post_init__(self):
        eps_p = np.atleast_2d(np.asarray(self.eps_p, dtype=float))
        eps_theta = np.asarray(self.eps_theta, dtype=float)
        object.__setattr__(self, "eps_p", eps_p)
        object.__setattr__(self, "eps_theta", eps_theta)
        if eps_p.shape[0] != eps_theta.size or eps_p.shape[1] != 3:
            raise ValueError("eps_p must be (m, 3) matching eps_theta length m")
        if np.any(eps_p <= 0) or np.any(eps_theta <= 0):
            raise ValueError("tolerances must be positive")

    @classmethod
    def uniform(cls, m: int, eps_p: float | tuple = 0.02, eps_theta: float = 0.1):
        eps_p = np.broadcast_to(np.asarray(eps_p, dtype=float), (3,))
        return cls(np.tile(eps_p, (m, 1)), np.full(m, float(eps_theta)))

    def to_dict(self) -> dict:
        return {"eps_p": self.eps_p.tolist(), "eps_theta": self.eps_theta.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ToleranceProfile":
        return cls(np.asarray(d["eps_p"], dtype=float), np.asarray(d["eps_theta"], dtype=float))


@dataclass
class TrajGenConfig:
    alpha: float = 1.0  # duration weight
    beta: float = 0.04  # integrated squared normalized jerk weight
    gamma: float = 1.0  # control-point anchor weight
    order: int = 4
    duration_band: float | None = 0.5  # seconds around the timing-stage total
    quadrature_points: int = 64
    # plan to 90% of the limit bands: execution headroom for tracking
    # controllers and learned reproductions of the output trajectory
    limit_margin: float = 0.1
    # feas_tol is in scaled constraint units: 2e-5 of each row's natural
    # scale (0.4 um on a 2 cm tolerance row). opt_tol is the relative
    # stationarity plateau a limited-memory method reaches on the stiff
    # jerk quadratic; tightening it further does not move the solution.
    solver: nlp.SolverOptions = field(default_factory=lambda: nlp.SolverOptions(
        feas_tol=2e-5, opt_tol=5e-2, rho0=100.0, rho_growth=5.0,
        max_outer=30, max_inner=1500))

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0 or \
                max(self.alpha, self.beta, self.gamma) <= 0:
            raise ValueError("cost weights must be non-negative with at least one positive")


@dataclass(frozen=True)
class SmoothTrajectory:
    """Converged output trajectory plus the schedule and tolerances it satisfies."""

    traj: spline.TimedTrajectory
    tau: np.ndarray
    tolerances: ToleranceProfile
    report: dict
    solution: nlp.Solution | None = None

    @property
    def duration(self) -> float:
        return self.traj.duration

    def to_dict(self) -> dict:
        import json
        doc = json.loads(spline.trajectory_to_json(self.traj))
        doc["tau"] = self.tau.tolist()
        doc["tolerances"] = self.tolerances.to_dict()
        doc["verification"] = self.report
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "SmoothTrajectory":
        traj = spline.trajectory_from_dict(doc)
        return cls(traj, np.asarray(doc["tau"], dtype=float),
                   ToleranceProfile.from_dict(doc["tolerances"]),
                   doc.get("verification", {}))


def _quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


class _TrajGenProblem:
    """Assembles the NLP once; cheap repeated evaluation with analytic Jacobians."""

    def __init__(self, wps, tau, tol, model, cfg, duration_center):
        self.m = len(wps)
        self.n = model.dof
        self.model = model
        self.cfg = cfg
        self.Q = np.array([w.Q for w in wps])
        self.p_ref = np.array([w.p for w in wps])
        self.R_ref = np.array([_quat_to_matrix(w.theta) for w in wps])
        self.tau = np.asarray(tau, dtype=float)
        if self.tau.shape != (self.m,) or self.tau[0] != 0 or self.tau[-1] != 1 \
                or np.any(np.diff(self.tau) <= 0):
            raise ValueError("tau must increase strictly from 0 to 1, one per waypoint")
        self.tol = tol
        if tol.eps_p.shape[0] != self.m:
            raise ValueError("tolerance profile does not match waypoint count")

        self.nc = max(self.m, cfg.order)  # control points; >= order for tiny inputs
        self.kv = spline.make_clamped_knots(self.nc, cfg.order)
        # fixed rows pin the endpoints at rest: P0=P1=Q[0], P[-2]=P[-1]=Q[-1]
        self.fixed = {0: self.Q[0], 1: self.Q[0],
                      self.nc - 2: self.Q[-1], self.nc - 1: self.Q[-1]}
        self.free = [i for i in range(self.nc) if i not in self.fixed]
        self.anchor = self.Q if self.nc == self.m else \
            self.Q[np.round(np.linspace(0, self.m - 1, self.nc)).astype(int)]

        self.B_tau = spline.basis_matrix(self.kv, self.tau)  # (m, nc)
        self.D1 = spline.derivative_matrix(self.kv, 1)
        self.D2 = spline.derivative_matrix(self.kv, 2)
        self.D3 = spline.derivative_matrix(self.kv, 3)

        x_gl, w_gl = np.polynomial.legendre.leggauss(cfg.quadrature_points)
        s_q = 0.5 * (x_gl + 1.0)
        w_q = 0.5 * w_gl
        N3 = spline._basis_matrix_raw(self.kv.knots[3:-3], cfg.order - 3, s_q)
        G = N3 @ self.D3  # jerk value rows at quadrature nodes
        self.M_jerk = G.T @ (w_q[:, None] * G)  # integral ||jerk||^2 = sum_d p_d' M p_d

        lim = model.limits
        mar = cfg.limit_margin
        self.q_lo = lim.q_min + mar * (lim.q_max - lim.q_min)
        self.q_hi = lim.q_max - mar * (lim.q_max - lim.q_min)
        self.v_lo, self.v_hi = lim.v_min * (1 - mar), lim.v_max * (1 - mar)
        self.a_lo, self.a_hi = lim.a_min * (1 - mar), lim.a_max * (1 - mar)
        self.j_lo, self.j_hi = lim.j_min * (1 - mar), lim.j_max * (1 - mar)

        self.duration_center = duration_center
        if cfg.duration_band is not None and duration_center is not None:
            self.T_lo = max(_T_FLOOR, duration_center - cfg.duration_band)
            self.T_hi = duration_center + cfg.duration_band
        else:
            self.T_lo, self.T_hi = _T_FLOOR, np.inf

        self.nfree = len(self.free)
        self.dim = self.nfree * self.n + 1
        self.sin2_half = np.sin(self.tol.eps_theta / 2.0) ** 2

        # every constraint row is normalized to O(1) by its natural scale so a
        # single augmented-Lagrangian penalty conditions all of them equally
        T_ref = duration_center if duration_center else 1.0
        self.s_vel = np.maximum(np.abs(self.v_lo), np.abs(self.v_hi)) * T_ref
        self.s_acc = np.maximum(np.abs(self.a_lo), np.abs(self.a_hi)) * T_ref**2
        self.s_jerk = np.maximum(np.abs(self.j_lo), np.abs(self.j_hi)) * T_ref**3
        self.s_pos = self.tol.eps_p  # (m, 3)
        self.s_ang = self.sin2_half  # (m,)

        self._pose_cache: tuple | None = None
        self.n_ineq = (2 * (self.D1.shape[0] + self.D2.shape[0] + self.D3.shape[0]) * self.n
                       + 7 * self.m)

    def full_points(self, x) -> tuple[np.ndarray, float]:
        P = np.empty((self.nc, self.n))
        if self.nfree:
            P[self.free] = x[:-1].reshape(self.nfree, self.n)
        for i, v in self.fixed.items():
            P[i] = v
        return P, float(x[-1])

    def initial_x(self) -> np.ndarray:
        x = np.empty(self.dim)
        x[:-1] = self.anchor[self.free].ravel()
        if self.duration_center is not None:
            T0 = float(np.clip(self.duration_center, self.T_lo, self.T_hi))
        else:
            T0 = max(10 * _T_FLOOR, float(np.sum(
                np.max(np.abs(np.diff(self.Q, axis=0)) / self.v_hi, axis=1) * 2.0)))
        x[-1] = T0
        return x

    def bounds(self) -> np.ndarray:
        b = np.empty((self.dim, 2))
        b[:-1, 0] = np.tile(self.q_lo, self.nfree)
        b[:-1, 1] = np.tile(self.q_hi, self.nfree)
        b[-1] = (self.T_lo, self.T_hi)
        return b

    def cost(self, x) -> float:
        P, T = self.full_points(x)
        jerk = float(np.einsum("id,ij,jd->", P, self.M_jerk, P))
        reg = float(np.sum((P - self.anchor) ** 2))
        return self.cfg.alpha * T + self.cfg.beta * jerk + self.cfg.gamma * reg

    def cost_grad(self, x) -> np.ndarray:
        P, T = self.full_points(x)
        dP = 2 * self.cfg.beta * (self.M_jerk @ P) + 2 * self.cfg.gamma * (P - self.anchor)
        g = np.empty(self.dim)
        g[:-1] = dP[self.free].ravel()
        g[-1] = self.cfg.alpha
        return g

    def _pose_terms(self, P):
        key = P.tobytes()
        if self._pose_cache is not None and self._pose_cache[0] == key:
            return self._pose_cache[1]
        Qtau = self.B_tau @ P  # joint configuration at each waypoint instant
        terms = kin.batch_pose_with_grads(self.model, Qtau, self.R_ref)
        self._pose_cache = (key, terms)
        return terms

    def constraints(self, x) -> np.ndarray:
        P, T = self.full_points(x)
        V = self.D1 @ P
        A = self.D2 @ P
        Jk = self.D3 @ P
        p, _, c2, _ = self._pose_terms(P)
        dp = p - self.p_ref
        parts = [
            ((V - T * self.v_hi) / self.s_vel).ravel(),
            ((T * self.v_lo - V) / self.s_vel).ravel(),
            ((A - T**2 * self.a_hi) / self.s_acc).ravel(),
            ((T**2 * self.a_lo - A) / self.s_acc).ravel(),
            ((Jk - T**3 * self.j_hi) / self.s_jerk).ravel(),
            ((T**3 * self.j_lo - Jk) / self.s_jerk).ravel(),
            ((dp - self.tol.eps_p) / self.s_pos).ravel(),
            ((-dp - self.tol.eps_p) / self.s_pos).ravel(),
            ((1.0 - c2) - self.sin2_half) / self.s_ang,
        ]
        return np.concatenate(parts)

    def _row_sizes(self):
        nv = self.D1.shape[0] * self.n
        na = self.D2.shape[0] * self.n
        nj = self.D3.shape[0] * self.n
        m3 = 3 * self.m
        return nv, na, nj, m3

    def jtv(self, x, w) -> np.ndarray:
        """J^T w for the scaled constraint stack."""
        P, T = self.full_points(x)
        nv, na, nj, m3 = self._row_sizes()
        off = 0
        pieces = []
        for sz in (nv, nv, na, na, nj, nj, m3, m3, self.m):
            pieces.append(w[off:off + sz])
            off += sz
        wvu, wvl, wau, wal, wju, wjl, wpu, wpl, wang = pieces

        gP = np.zeros((self.nc, self.n))
        gT = 0.0
        for D, up, lo, scale, r in ((self.D1, wvu, wvl, self.s_vel, 1),
                                    (self.D2, wau, wal, self.s_acc, 2),
                                    (self.D3, wju, wjl, self.s_jerk, 3)):
            wd = ((up - lo).reshape(-1, self.n)) / scale
            gP += D.T @ wd
            hi = {1: self.v_hi, 2: self.a_hi, 3: self.j_hi}[r]
            lo_b = {1: self.v_lo, 2: self.a_lo, 3: self.j_lo}[r]
            dT = r * T**(r - 1)
            gT += dT * float(np.sum((lo_b / scale) * lo.reshape(-1, self.n))
                             - np.sum((hi / scale) * up.reshape(-1, self.n)))
        _, dp_dq, _, dc2_dq = self._pose_terms(P)
        wp = (wpu - wpl).reshape(self.m, 3) / self.s_pos
        # chain through q(tau_i) = B_tau[i] @ P
        gq = np.einsum("mi,min->mn", wp, dp_dq) - (wang / self.s_ang)[:, None] * dc2_dq
        gP += self.B_tau.T @ gq
        out = np.empty(self.dim)
        out[:-1] = gP[self.free].ravel()
        out[-1] = gT
        return out

    def constraints_jac(self, x) -> np.ndarray:
        """Dense Jacobian; used by the gradient checker, not the solve path."""
        rows = self.constraints(x).size
        J = np.empty((rows, self.dim))
        e = np.zeros(rows)
        for r in range(rows):
            e[r] = 1.0
            J[r] = self.jtv(x, e)
            e[r] = 0.0
        return J

    def violation_summary(self, x) -> dict:
        """Worst violation per constraint group, in physical units."""
        P, T = self.full_points(x)
        g = self.constraints(x)
        nv, na, nj, m3 = self._row_sizes()
        scales = [
            np.tile(self.s_vel, nv // self.n), np.tile(self.s_vel, nv // self.n),
            np.tile(self.s_acc, na // self.n), np.tile(self.s_acc, na // self.n),
            np.tile(self.s_jerk, nj // self.n), np.tile(self.s_jerk, nj // self.n),
            self.s_pos.ravel(), self.s_pos.ravel(), np.asarray(self.s_ang),
        ]
        names = ["vel", "vel", "acc", "acc", "jerk", "jerk",
                 "tol_pos", "tol_pos", "tol_ang"]
        out: dict[str, float] = {}
        r = 0
        for name, sc in zip(names, scales):
            sz = sc.size
            worst = float(np.max(g[r:r + sz] * sc, initial=-np.inf))
            out[name] = max(out.get(name, 0.0), worst, 0.0)
            r += sz
        return out


def generate(wps: list[Waypoint], tau, tol: ToleranceProfile, model: RobotModel,
             cfg: TrajGenConfig | None = None, warm: nlp.Solution | None = None,
             duration_center: float | None = None,
             cancel: Callable[[], bool] | None = None) -> SmoothTrajectory:
    """Solve the jerk-regulated trajectory problem; raises InfeasibleProblem on failure.

    When warm-started with component-wise looser tolerances than the warm run,
    the returned cost never exceeds the warm run's (the warm point stays
    feasible and is kept if the new solve cannot beat it).
    """
    cfg = cfg or TrajGenConfig()
    if cfg.order != 4:
        raise ValueError("only order=4 trajectories are supported")
    prob = _TrajGenProblem(wps, tau, tol, model, cfg, duration_center)
    problem = nlp.Problem(
        dim=prob.dim,
        objective=prob.cost,
        gradient=prob.cost_grad,
        ineq_constraints=[nlp.Fn(prob.constraints, jtv=prob.jtv, name="trajectory")],
        bounds=prob.bounds(),
    )
    x0 = prob.initial_x()
    if warm is not None and warm.x.size == prob.dim:
        x0 = np.clip(warm.x, prob.bounds()[:, 0], prob.bounds()[:, 1])
    sol = nlp.solve(problem, x0, cfg.solver, warm=warm, cancel=cancel)

    if warm is not None and warm.x.size == prob.dim:
        # nested feasible sets: keep the warm point if the fresh solve is worse
        wx = np.clip(warm.x, prob.bounds()[:, 0], prob.bounds()[:, 1])
        w_viol = float(np.max(np.maximum(prob.constraints(wx), 0.0), initial=0.0))
        if w_viol <= cfg.solver.feas_tol and (
                sol.status != "converged" or prob.cost(wx) < sol.objective_value):
            sol = nlp.Solution(
                x=wx, objective_value=prob.cost(wx),
                kkt_residual=sol.kkt_residual,
                constraint_violation=w_viol, status="converged",
                multipliers_eq=sol.multipliers_eq,
                multipliers_ineq=sol.multipliers_ineq,
                penalty=sol.penalty, outer_iterations=sol.outer_iterations,
                message="kept warm-start point (new solve did not improve)")

    if sol.status == "cancelled":
        raise InfeasibleProblem("trajectory generation cancelled", {"status": "cancelled"})
    if sol.status != "converged" or sol.constraint_violation > cfg.solver.feas_tol:
        raise InfeasibleProblem(
            "trajectory generation infeasible for the given tolerances",
            prob.violation_summary(sol.x) | {"status": sol.status})

    P, T = prob.full_points(sol.x)
    traj = spline.TimedTrajectory(spline.BSplineCurve(P, prob.kv), T)
    st = SmoothTrajectory(traj, prob.tau.copy(), tol, {}, sol)
    report = verify(st, model, wps, tol)
    return SmoothTrajectory(traj, prob.tau.copy(), tol, report, sol)


def verify(st: SmoothTrajectory, model: RobotModel, wps: list[Waypoint],
           tol: ToleranceProfile | None = None) -> dict:
    """Dense post-hoc check, independent of solver internals.

    Samples at a 1 kHz-equivalent grid in normalized time and reports the
    worst excess per kinematic band, per-waypoint pose residuals, endpoint
    residuals, and the normalized jerk metric.
    """
    tol = tol or st.tolerances
    traj = st.traj
    T = traj.duration
    N = max(int(np.ceil(T * 1000.0)), 10) + 1
    s = np.linspace(0.0, 1.0, N)
    curve = traj.curve
    q = spline.evaluate(curve, s)
    dq = metrics._spline_derivative(curve, s, 1) / T
    ddq = metrics._spline_derivative(curve, s, 2) / T**2
    dddq = metrics._spline_derivative(curve, s, 3) / T**3
    lim = model.limits
    band_excess = {}
    for name, val in (("pos", q), ("vel", dq), ("acc", ddq), ("jerk", dddq)):
        lo, hi = lim.band(name)
        band_excess[name] = float(max(np.max(val - hi), np.max(lo - val), 0.0))

    pos_err, ang_err, pos_excess, ang_excess = [], [], [], []
    for i, w in enumerate(wps):
        pose = kin.fk(model, spline.evaluate(curve, float(st.tau[i])))
        dp = np.abs(pose.p - w.p)
        da = kin.quat_diff(pose.theta, w.theta)
        pos_err.append(float(np.max(dp)))
        ang_err.append(float(da))
        pos_excess.append(float(max(np.max(dp - tol.eps_p[i]), 0.0)))
        ang_excess.append(float(max(da - tol.eps_theta[i], 0.0)))

    return {
        "duration_s": T,
        "max_violation_per_band": band_excess,
        "waypoint_pos_err": pos_err,
        "waypoint_ang_err": ang_err,
        "waypoint_pos_excess": pos_excess,
        "waypoint_ang_excess": ang_excess,
        "endpoint_err": [float(np.max(np.abs(q[0] - wps[0].Q))),
                         float(np.max(np.abs(q[-1] - wps[-1].Q)))],
        "boundary_speed": [float(np.max(np.abs(dq[0]))), float(np.max(np.abs(dq[-1])))],
        "manj": metrics.manj(traj),
    }
