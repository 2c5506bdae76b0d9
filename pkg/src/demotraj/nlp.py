"""Constrained nonlinear programming via an augmented Lagrangian.

Outer loop: method of multipliers with monotone penalty growth. Inner loop:
limited-memory quasi-Newton with projection onto the variable box (L-BFGS-B).
Gradients may be analytic or fall back to central differences per callback.

Deterministic: identical problem, start point, and options produce an
identical solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

__all__ = ["Fn", "Problem", "SolverOptions", "Solution", "GradientReport",
           "solve", "check_gradients"]


@dataclass
class Fn:
    """Vector-valued differentiable callback.

    jac: full Jacobian (rows = outputs). jtv: Jacobian-transpose-vector
    product jtv(x, w) = J(x)^T w; preferred by the solver when present since
    it avoids materializing large Jacobians.
    """

    f: Callable[[np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray] | None = None
    jtv: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    name: str = ""


@dataclass
class Problem:
    """min objective(x) s.t. eq(x) = 0, ineq(x) <= 0, lo <= x <= hi."""

    dim: int
    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray] | None = None
    eq_constraints: list[Fn] = field(default_factory=list)
    ineq_constraints: list[Fn] = field(default_factory=list)
    bounds: np.ndarray | None = None  # (dim, 2)


@dataclass
class SolverOptions:
    feas_tol: float = 1e-6
    opt_tol: float = 1e-5
    max_outer: int = 50
    max_inner: int = 500
    rho0: float = 10.0
    rho_growth: float = 10.0
    rho_max: float = 1e10


@dataclass
class Solution:
    x: np.ndarray
    objective_value: float
    # projected Lagrangian-gradient norm, scaled by the objective gradient
    # magnitude (stationarity is judged relative to the problem's own scale,
    # as production NLP codes do)
    kkt_residual: float
    constraint_violation: float
    status: str  # converged | max_iter | infeasible | numeric_failure | cancelled
    multipliers_eq: np.ndarray
    multipliers_ineq: np.ndarray
    penalty: float
    outer_iterations: int
    message: str = ""
    history: list = field(default_factory=list)  # per-outer: merit start/end, violation


class _NumericError(Exception):
    pass


def _fd_gradient(f, x, scalar=True):
    x = np.asarray(x, dtype=float)
    f0 = np.atleast_1d(np.asarray(f(x), dtype=float))
    out = np.empty((f0.size, x.size)) if not scalar else np.empty(x.size)
    for i in range(x.size):
        h = 1e-6 * (1.0 + abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        d = (np.asarray(f(xp), dtype=float) - np.asarray(f(xm), dtype=float)) / (2 * h)
        if scalar:
            out[i] = d
        else:
            out[:, i] = d
    return out


def _finite_or_raise(v, what: str):
    if not np.all(np.isfinite(v)):
        raise _NumericError(f"{what} returned NaN/Inf")
    return v


class _Evaluator:
    """Caches one concatenated evaluation of objective + constraints per x."""

    def __init__(self, problem: Problem):
        self.p = problem
        self._x = None
        self._data = None

    def _obj_grad(self, x):
        if self.p.gradient is not None:
            return np.asarray(self.p.gradient(x), dtype=float)
        return _fd_gradient(self.p.objective, x, scalar=True)

    def at(self, x: np.ndarray):
        """Objective, gradient, and stacked constraint values at x (cached)."""
        key = x.tobytes()
        if self._x == key:
            return self._data
        f = float(self.p.objective(x))
        _finite_or_raise(f, "objective")
        g = self._obj_grad(x)
        _finite_or_raise(g, "objective gradient")
        ceq, eq_sizes = self._stack(self.p.eq_constraints, x, "equality constraint")
        cin, in_sizes = self._stack(self.p.ineq_constraints, x, "inequality constraint")
        self._x = key
        self._data = (f, g, ceq, cin, eq_sizes, in_sizes)
        return self._data

    def _stack(self, fns: list[Fn], x, what):
        if not fns:
            return np.zeros(0), []
        vals = []
        for fn in fns:
            v = np.atleast_1d(np.asarray(fn.f(x), dtype=float))
            _finite_or_raise(v, what)
            vals.append(v)
        return np.concatenate(vals), [v.size for v in vals]

    def jac_t_dot(self, fns: list[Fn], sizes, x, w) -> np.ndarray:
        """Sum of J_i(x)^T w_i over the stacked constraint callbacks."""
        out = np.zeros(self.p.dim)
        off = 0
        for fn, size in zip(fns, sizes):
            wi = w[off:off + size]
            off += size
            if not np.any(wi):
                continue
            if fn.jtv is not None:
                out += np.asarray(fn.jtv(x, wi), dtype=float)
            elif fn.jac is not None:
                out += np.atleast_2d(np.asarray(fn.jac(x), dtype=float)).T @ wi
            else:
                out += np.atleast_2d(_fd_gradient(fn.f, x, scalar=False)).T @ wi
        _finite_or_raise(out, "constraint jacobian product")
        return out


def _violation(ceq, cin) -> float:
    v = 0.0
    if ceq.size:
        v = max(v, float(np.max(np.abs(ceq))))
    if cin.size:
        v = max(v, float(np.max(np.maximum(cin, 0.0))))
    return v


def solve(problem: Problem, x0, opts: SolverOptions | None = None,
          warm: Solution | None = None,
          cancel: Callable[[], bool] | None = None) -> Solution:
    """Augmented Lagrangian with L-BFGS-B inner minimization."""
    opts = opts or SolverOptions()
    x = np.asarray(x0, dtype=float).copy()
    if problem.bounds is not None:
        lo, hi = problem.bounds[:, 0], problem.bounds[:, 1]
        x = np.clip(x, lo, hi)
        bounds = list(zip(lo, hi))
    else:
        lo = np.full(problem.dim, -np.inf)
        hi = np.full(problem.dim, np.inf)
        bounds = None

    ev = _Evaluator(problem)
    try:
        f, g, ceq, cin, eq_sizes, in_sizes = ev.at(x)
    except _NumericError as e:
        return Solution(x, np.nan, np.inf, np.inf, "numeric_failure",
                        np.zeros(0), np.zeros(0), opts.rho0, 0, str(e))

    lam = np.zeros(ceq.size)
    mu = np.zeros(cin.size)
    rho = opts.rho0
    if warm is not None:
        # multipliers transfer well; the accumulated penalty does not (it
        # over-stiffens the first inner solves), so restart it
        if warm.multipliers_eq.size == ceq.size:
            lam = warm.multipliers_eq.copy()
        if warm.multipliers_ineq.size == cin.size:
            mu = warm.multipliers_ineq.copy()

    def merit_and_grad(xv):
        f, gobj, ceq, cin, eq_s, in_s = ev.at(xv)
        m = f
        grad = gobj.copy()
        if ceq.size:
            m += lam @ ceq + 0.5 * rho * float(ceq @ ceq)
            grad += ev.jac_t_dot(problem.eq_constraints, eq_s, xv, lam + rho * ceq)
        if cin.size:
            act = np.maximum(0.0, mu + rho * cin)
            m += float(act @ act - mu @ mu) / (2.0 * rho)
            grad += ev.jac_t_dot(problem.ineq_constraints, in_s, xv, act)
        return m, grad

    def kkt_residual(xv, lam_v, mu_v):
        _, gobj, _, cin_v, eq_s, in_s = ev.at(xv)
        gl = gobj.copy()
        if lam_v.size:
            gl += ev.jac_t_dot(problem.eq_constraints, eq_s, xv, lam_v)
        if mu_v.size:
            gl += ev.jac_t_dot(problem.ineq_constraints, in_s, xv, mu_v)
        proj = np.clip(xv - gl, lo, hi)
        stat = float(np.max(np.abs(proj - xv))) if xv.size else 0.0
        comp = float(np.max(np.abs(mu_v * cin_v))) if mu_v.size else 0.0
        scale = max(1.0, float(np.max(np.abs(gobj))) if gobj.size else 1.0)
        return max(stat, comp) / scale

    # penalty-adaptive feasibility gate and inner tolerance: the gate relaxes
    # whenever the penalty grows, so multiplier updates keep happening and the
    # penalty stays moderate (method-of-multipliers schedule)
    eta = max(1.0 / rho**0.1, 0.9 * opts.feas_tol)
    omega = max(1.0 / rho, 0.1 * opts.opt_tol)
    best_viol = np.inf
    stall = 0
    status = "max_iter"
    message = ""
    outer = 0
    history: list[dict] = []
    try:
        for outer in range(1, opts.max_outer + 1):
            if cancel is not None and cancel():
                status = "cancelled"
                break
            merit_start = merit_and_grad(x)[0]
            res = minimize(merit_and_grad, x, jac=True, method="L-BFGS-B",
                           bounds=bounds,
                           options={"maxiter": opts.max_inner, "gtol": omega,
                                    "ftol": 1e-16, "maxcor": 20})
            x = np.asarray(res.x, dtype=float)
            history.append({"merit_start": float(merit_start),
                            "merit_end": float(res.fun), "rho": rho})
            f, gobj, ceq, cin, _, _ = ev.at(x)
            viol = _violation(ceq, cin)
            history[-1]["violation"] = viol

            if viol <= max(eta, opts.feas_tol):
                # accept: first-order multiplier update, tighten both gates
                lam = lam + rho * ceq if ceq.size else lam
                mu = np.maximum(0.0, mu + rho * cin) if cin.size else mu
                kkt = kkt_residual(x, lam, mu)
                if viol <= opts.feas_tol and kkt <= opts.opt_tol:
                    status = "converged"
                    break
                eta = max(eta / rho**0.9, 0.9 * opts.feas_tol)
                omega = max(omega / rho, 0.1 * opts.opt_tol)
            else:
                rho = min(rho * opts.rho_growth, opts.rho_max)
                eta = max(1.0 / rho**0.1, 0.9 * opts.feas_tol)
                omega = max(1.0 / rho, 0.1 * opts.opt_tol)

            if viol < 0.9 * best_viol:
                best_viol = viol
                stall = 0
            else:
                stall += 1
            if rho >= opts.rho_max and viol > opts.feas_tol and stall >= 3:
                status = "infeasible"
                message = f"penalty at maximum with violation {viol:.3e}"
                break
    except _NumericError as e:
        return Solution(x, np.nan, np.inf, np.inf, "numeric_failure",
                        lam, mu, rho, outer, str(e))

    f, gobj, ceq, cin, _, _ = ev.at(x)
    return Solution(
        x=x,
        objective_value=float(f),
        kkt_residual=kkt_residual(x, lam, mu),
        constraint_violation=_violation(ceq, cin),
        status=status,
        multipliers_eq=lam,
        multipliers_ineq=mu,
        penalty=rho,
        outer_iterations=outer,
        message=message,
        history=history,
    )


@dataclass
class GradientReport:
    entries: list[tuple[str, float, bool]]  # (name, max relative error, flagged)

    @property
    def flagged(self) -> list[str]:
        return [name for name, _, bad in self.entries if bad]


def check_gradients(problem: Problem, x, threshold: float = 1e-4) -> GradientReport:
    """Compare analytic gradients against central differences per callback."""
    x = np.asarray(x, dtype=float)
    entries = []

    def compare(name, analytic, fd):
        scale = max(1.0, float(np.max(np.abs(fd))) if fd.size else 0.0)
        err = float(np.max(np.abs(analytic - fd))) / scale if fd.size else 0.0
        entries.append((name, err, err > threshold))

    if problem.gradient is not None:
        compare("objective", np.asarray(problem.gradient(x), dtype=float),
                _fd_gradient(problem.objective, x, scalar=True))
    for group, fns in (("eq", problem.eq_constraints), ("ineq", problem.ineq_constraints)):
        for i, fn in enumerate(fns):
            if fn.jac is None:
                continue
            name = fn.name or f"{group}[{i}]"
            compare(name, np.atleast_2d(np.asarray(fn.jac(x), dtype=float)),
                    np.atleast_2d(_fd_gradient(fn.f, x, scalar=False)))
    return GradientReport(entries)
