"""Interactive-refinement math: brake filtering, time remapping, tolerances.

A held brake command C in [-1, 0] is smoothed by a virtual spring-damper
into R, which decelerates the replay clock. Inverting the resulting time map
at the waypoint schedule re-times the motion; evaluating R where the replay
passes each waypoint turns "slower here" into "more precise here".

The scalar update steps live in one place (ReplayIntegrator) and are used by
both the offline functions and the live replay service, so a recorded trace
re-processed offline reproduces the online result bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import IncompleteReplay
from .trajgen import ToleranceProfile

__all__ = [
    "CommandFilterParams",
    "ToleranceMapParams",
    "TimeMap",
    "RefinementTrace",
    "RefinementResult",
    "ReplayIntegrator",
    "filter_command",
    "integrate_time_map",
    "remap_timings",
    "extract_tolerances",
    "refine_offline",
    "read_command_trace",
    "write_command_trace",
]


@dataclass(frozen=True)
class CommandFilterParams:
    """Spring-damper command filter: tau_f*R'' = K*(C - R) - D*R'."""

    tau_f: float = 0.1
    K: float = 100.0
    D: float = 20.0
    dt: float = 0.01

    def __post_init__(self):
        if min(self.tau_f, self.K, self.D, self.dt) <= 0:
            raise ValueError("filter parameters must be positive")


@dataclass(frozen=True)
class ToleranceMapParams:
    """Range and shape of the brake-to-tolerance map."""

    eps_p_max: float = 0.05
    eps_p_min: float = 0.01
    eps_theta_max: float = 0.3
    eps_theta_min: float = 0.1
    exponent: float = 2.0

    def __post_init__(self):
        if self.eps_p_max <= self.eps_p_min or self.eps_theta_max <= self.eps_theta_min:
            raise ValueError("max tolerances must exceed min tolerances")
        if min(self.eps_p_min, self.eps_theta_min, self.exponent) <= 0:
            raise ValueError("tolerances and exponent must be positive")

    def gamma_p(self, R) -> np.ndarray:
        return self._gamma(R, self.eps_p_max, self.eps_p_min)

    def gamma_theta(self, R) -> np.ndarray:
        return self._gamma(R, self.eps_theta_max, self.eps_theta_min)

    def _gamma(self, R, hi, lo) -> np.ndarray:
        R = np.asarray(R, dtype=float)
        w = (-R) ** self.exponent
        # convex-combination form is exact at both endpoints
        return hi * (1.0 - w) + lo * w


class ReplayIntegrator:
    """Fixed-rate integrator of the command filter and the replay time map.

    Semi-implicit Euler at the 100 Hz service tick. The time map consumes the
    filtered value sampled at the start of each tick (sample-and-hold), which
    makes a batch re-run over the recorded command column bitwise identical
    to the live pass.
    """

    def __init__(self, params: CommandFilterParams, V0r: float, Vminr: float):
        if not 0 < Vminr <= V0r:
            raise ValueError("need 0 < Vminr <= V0r")
        self.p = params
        self.V0r = V0r
        self.Vminr = Vminr
        self.k = 0
        self.R = 0.0
        self.Rdot = 0.0
        self.v = V0r
        self.s = 0.0
        self._braked = False

    @property
    def t(self) -> float:
        return self.k * self.p.dt

    @property
    def done(self) -> bool:
        return self.s >= 1.0

    def tick(self, C: float) -> tuple[float, float, float, float]:
        """Advance one dt using command C; returns the new (t, R, v, s)."""
        p = self.p
        v2 = self.v + p.dt * self.R
        if v2 < self.Vminr:
            v2 = self.Vminr
        elif v2 > self.V0r:
            v2 = self.V0r
        if not self._braked and self.R == 0.0:
            # exact closed form while untouched: no accumulation drift
            s2 = self.V0r * ((self.k + 1) * p.dt)
        else:
            s2 = self.s + p.dt * v2
        if s2 > 1.0:
            s2 = 1.0
        if self.R != 0.0:
            self._braked = True
        # damping handled implicitly: the explicit splitting is unstable at
        # dt = 0.01 with the published stiffness (fast pole ~ -195 1/s)
        Rdot2 = (self.Rdot + p.dt * p.K * (C - self.R) / p.tau_f) \
            / (1.0 + p.dt * p.D / p.tau_f)
        R2 = self.R + p.dt * Rdot2
        if R2 < -1.0:
            R2 = -1.0
        elif R2 > 0.0:
            R2 = 0.0
        self.v, self.s, self.R, self.Rdot = v2, s2, R2, Rdot2
        self.k += 1
        return self.t, self.R, self.v, self.s


def filter_command(C: np.ndarray, params: CommandFilterParams | None = None) -> np.ndarray:
    """Filtered brake signal R sampled on the same grid as C, from rest."""
    params = params or CommandFilterParams()
    C = np.asarray(C, dtype=float)
    if np.any(C > 0.0) or np.any(C < -1.0):
        raise ValueError("command samples must lie in [-1, 0]")
    R = np.empty(C.size)
    integ = ReplayIntegrator(params, 1.0, 1.0)
    R[0] = 0.0
    for i in range(C.size - 1):
        integ.tick(float(C[i]))
        R[i + 1] = integ.R
    return R


@dataclass(frozen=True)
class TimeMap:
    """Sampled replay time map: s_r(t) with its speed profile."""

    t: np.ndarray
    v: np.ndarray
    s_r: np.ndarray
    V0r: float
    Vminr: float
    braked: bool

    @property
    def complete(self) -> bool:
        return bool(self.s_r[-1] >= 1.0)


def integrate_time_map(R: np.ndarray, V0r: float, Vminr: float,
                       dt: float = 0.01) -> TimeMap:
    """Integrate v' = R, s' = v with v clamped to [Vminr, V0r]; stops at s = 1."""
    R = np.asarray(R, dtype=float)
    params = CommandFilterParams(dt=dt)
    integ = ReplayIntegrator(params, V0r, Vminr)
    t = [0.0]
    v = [V0r]
    s = [0.0]
    for i in range(R.size):
        # drive the speed path directly with the provided R samples
        integ.R = float(R[i])
        ti, _, vi, si = integ.tick(0.0)
        t.append(ti)
        v.append(vi)
        s.append(si)
        if si >= 1.0:
            break
    return TimeMap(np.array(t), np.array(v), np.array(s), V0r, Vminr, integ._braked)


def remap_timings(tm: TimeMap, tau: np.ndarray) -> np.ndarray:
    """Revised normalized schedule: inverse of s_r at tau, normalized to end at 1."""
    tau = np.asarray(tau, dtype=float)
    if not tm.complete or tm.s_r[-1] < tau[-1]:
        raise IncompleteReplay("replay ended before the final waypoint")
    if not tm.braked:
        # constant replay speed cancels in the normalization; skip the
        # interpolation round-off entirely
        return tau.copy()
    t_i = np.interp(tau, tm.s_r, tm.t)
    return t_i / t_i[-1]


def extract_tolerances(R: np.ndarray, tm: TimeMap, tau: np.ndarray,
                       params: ToleranceMapParams | None = None) -> ToleranceProfile:
    """Brake intensity where the replay passes each waypoint, mapped to tolerances."""
    params = params or ToleranceMapParams()
    tau = np.asarray(tau, dtype=float)
    if not tm.complete or tm.s_r[-1] < tau[-1]:
        raise IncompleteReplay("replay ended before the final waypoint")
    R = np.asarray(R, dtype=float)
    t_R = np.arange(R.size) * (tm.t[1] - tm.t[0]) if R.size else np.zeros(0)
    t_i = np.interp(tau, tm.s_r, tm.t)
    R_i = np.interp(t_i, t_R, R)
    eps_p = params.gamma_p(R_i)
    eps_theta = params.gamma_theta(R_i)
    return ToleranceProfile(np.repeat(eps_p[:, None], 3, axis=1), eps_theta)


@dataclass(frozen=True)
class RefinementTrace:
    """Everything the refinement loop saw, for auditing and offline replay."""

    t: np.ndarray
    C: np.ndarray
    R: np.ndarray
    v: np.ndarray
    s_r: np.ndarray
    V0r: float
    Vminr: float
    eta: float


@dataclass(frozen=True)
class RefinementResult:
    tau_r: np.ndarray
    tolerances: ToleranceProfile
    trace: RefinementTrace

    def __post_init__(self):
        tr = np.asarray(self.tau_r, dtype=float)
        object.__setattr__(self, "tau_r", tr)
        if tr[0] != 0.0 or tr[-1] != 1.0 or np.any(np.diff(tr) <= 0):
            raise ValueError("tau_r must increase strictly from 0 to 1")

    def to_dict(self) -> dict:
        return {
            "tau_r": self.tau_r.tolist(),
            "tolerances": self.tolerances.to_dict(),
            "trace": {
                "t": self.trace.t.tolist(),
                "C": self.trace.C.tolist(),
                "R": self.trace.R.tolist(),
                "v": self.trace.v.tolist(),
                "s_r": self.trace.s_r.tolist(),
                "V0r": self.trace.V0r,
                "Vminr": self.trace.Vminr,
                "eta": self.trace.eta,
            },
        }


def refine_offline(C: np.ndarray, tau: np.ndarray, duration: float,
                   eta: float = 5.0, vmin_ratio: float = 0.2,
                   filter_params: CommandFilterParams | None = None,
                   tol_params: ToleranceMapParams | None = None) -> RefinementResult:
    """Full offline refinement of a recorded command trace.

    The replay runs at reduced speed V0r = 1/(eta * duration); C may be
    shorter than the replay (it is padded with zeros, i.e. brake released).
    """
    if eta <= 1.0:
        raise ValueError("eta must exceed 1")
    if not 0 < vmin_ratio <= 1:
        raise ValueError("vmin_ratio must be in (0, 1]")
    filter_params = filter_params or CommandFilterParams()
    C = np.asarray(C, dtype=float)
    V0r = 1.0 / (eta * duration)
    Vminr = vmin_ratio * V0r
    # worst case the replay crawls at Vminr the whole way
    max_steps = int(np.ceil(1.0 / (Vminr * filter_params.dt))) + 2
    if C.size < max_steps:
        C = np.concatenate([C, np.zeros(max_steps - C.size)])
    R = filter_command(C, filter_params)
    tm = integrate_time_map(R, V0r, Vminr, filter_params.dt)
    tau_r = remap_timings(tm, tau)
    tol = extract_tolerances(R, tm, tau, tol_params)
    n = tm.t.size
    trace = RefinementTrace(tm.t, C[:n], R[:n], tm.v, tm.s_r, V0r, Vminr, eta)
    return RefinementResult(tau_r, tol, trace)


def write_command_trace(path: str | Path, t: np.ndarray, C: np.ndarray) -> None:
    rows = ["t,C"]
    for ti, ci in zip(t, C):
        rows.append(f"{ti:.17g},{ci:.17g}")
    Path(path).write_text("\n".join(rows) + "\n")


def read_command_trace(path: str | Path, dt: float = 0.01) -> np.ndarray:
    """Command column of a `t,C` CSV; validates the fixed sampling step."""
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        return np.zeros(0)
    t, C = data[:, 0], data[:, 1]
    if t.size > 1 and np.max(np.abs(np.diff(t) - dt)) > 1e-9:
        raise ValueError(f"command trace is not sampled at dt={dt}")
    return C
