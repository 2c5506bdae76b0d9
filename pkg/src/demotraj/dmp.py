"""Joint-space discrete dynamic movement primitives for baseline comparisons.

Point-attractor transformation systems with a learned forcing term over an
exponentially decaying phase; training by locally weighted regression on
Gaussian basis functions. Duration changes rescale the phase clock, which is
the temporal-scaling property the scaled baseline relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["DmpModel", "DmpRollout", "train", "rollout"]


@dataclass(frozen=True)
class DmpModel:
    alpha_z: float
    beta_z: float  # alpha_z / 4: critically damped attractor
    alpha_x: float
    T_d: float  # nominal (training) duration
    y0: np.ndarray  # (n,)
    goal: np.ndarray  # (n,)
    weights: np.ndarray  # (n, n_basis)
    centers: np.ndarray  # (n_basis,)
    widths: np.ndarray  # (n_basis,)

    @property
    def dof(self) -> int:
        return self.y0.size

    def to_dict(self) -> dict:
        return {
            "alpha_z": self.alpha_z,
            "beta_z": self.beta_z,
            "alpha_x": self.alpha_x,
            "T_d": self.T_d,
            "centers": self.centers.tolist(),
            "widths": self.widths.tolist(),
            "per_joint": [
                {"y0": float(self.y0[j]), "g": float(self.goal[j]),
                 "weights": self.weights[j].tolist()}
                for j in range(self.dof)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DmpModel":
        per = d["per_joint"]
        return cls(
            alpha_z=float(d["alpha_z"]), beta_z=float(d["beta_z"]),
            alpha_x=float(d["alpha_x"]), T_d=float(d["T_d"]),
            y0=np.array([j["y0"] for j in per]),
            goal=np.array([j["g"] for j in per]),
            weights=np.array([j["weights"] for j in per]),
            centers=np.asarray(d["centers"], dtype=float),
            widths=np.asarray(d["widths"], dtype=float),
        )


@dataclass(frozen=True)
class DmpRollout:
    """Integrated rollout with analytic derivatives up to jerk."""

    t: np.ndarray
    y: np.ndarray  # (N, n)
    yd: np.ndarray
    ydd: np.ndarray
    yddd: np.ndarray
    duration: float


def _basis_grid(alpha_x: float, n_basis: int) -> tuple[np.ndarray, np.ndarray]:
    centers = np.exp(-alpha_x * np.linspace(0.0, 1.0, n_basis))
    widths = np.empty(n_basis)
    # overlap factor 4: localizes the fit, keeps the forcing quiet at the end
    widths[:-1] = 4.0 / np.diff(centers) ** 2
    widths[-1] = widths[-2]
    return centers, widths


def train(t: np.ndarray, q: np.ndarray, n_basis: int = 25,
          alpha_z: float = 48.0, alpha_x: float = 3.0) -> DmpModel:
    """Fit forcing weights per joint by locally weighted regression."""
    t = np.asarray(t, dtype=float)
    q = np.atleast_2d(np.asarray(q, dtype=float))
    if t.size < 4:
        raise ValueError("need at least 4 samples to train")
    if np.any(np.diff(t) <= 0):
        raise ValueError("timestamps must be strictly increasing")
    if n_basis < 3:
        raise ValueError("need at least 3 basis functions")
    T = float(t[-1] - t[0])
    if T <= 0:
        raise ValueError("degenerate duration")
    beta_z = alpha_z / 4.0
    y0 = q[0].copy()
    g = q[-1].copy()
    yd = np.gradient(q, t, axis=0)
    ydd = np.gradient(yd, t, axis=0)
    x = np.exp(-alpha_x * (t - t[0]) / T)
    centers, widths = _basis_grid(alpha_x, n_basis)
    psi = np.exp(-widths[None, :] * (x[:, None] - centers[None, :]) ** 2)  # (N, B)

    n = q.shape[1]
    W = np.zeros((n, n_basis))
    for j in range(n):
        amp = g[j] - y0[j]
        if abs(amp) < 1e-12:
            continue
        f_target = T**2 * ydd[:, j] - alpha_z * (beta_z * (g[j] - q[:, j]) - T * yd[:, j])
        xi = x * amp
        num = psi.T @ (xi * f_target)
        den = psi.T @ (xi * xi)
        W[j] = np.where(den > 1e-12, num / np.where(den > 1e-12, den, 1.0), 0.0)
    return DmpModel(alpha_z, beta_z, alpha_x, T, y0, g, W, centers, widths)


def rollout(model: DmpModel, start: np.ndarray | None = None,
            goal: np.ndarray | None = None, duration: float | None = None,
            dt: float = 1e-3) -> DmpRollout:
    """Euler-integrate the canonical and transformation systems."""
    if duration is None:
        duration = model.T_d
    if duration <= 0 or dt <= 0:
        raise ValueError("duration and dt must be positive")
    y0 = model.y0 if start is None else np.asarray(start, dtype=float)
    g = model.goal if goal is None else np.asarray(goal, dtype=float)
    n = model.dof
    amp = g - y0
    az, bz, ax, T = model.alpha_z, model.beta_z, model.alpha_x, float(duration)
    c, h, W = model.centers, model.widths, model.weights

    steps = int(round(T / dt))
    N = steps + 1
    t = np.arange(N) * dt
    y = np.empty((N, n))
    yd = np.empty((N, n))
    ydd = np.empty((N, n))
    yddd = np.empty((N, n))

    yv = y0.astype(float).copy()
    zv = np.zeros(n)
    xv = 1.0
    for i in range(N):
        psi = np.exp(-h * (xv - c) ** 2)
        spsi = float(np.sum(psi)) + 1e-10
        nu = (W @ psi) / spsi
        f = nu * xv * amp
        dz = (az * (bz * (g - yv) - zv) + f) / T
        dy = zv / T
        dx = -ax * xv / T
        # d(psi)/dx and the quotient rule give the forcing slope for the jerk
        dpsi = -2.0 * h * (xv - c) * psi
        dnu = ((W @ dpsi) - nu * float(np.sum(dpsi))) / spsi
        fprime = (dnu * xv + nu) * amp
        y[i] = yv
        yd[i] = dy
        ydd[i] = dz / T
        yddd[i] = (az * (-bz * dy - dz) + fprime * dx) / T**2
        if i < N - 1:
            yv = yv + dt * dy
            zv = zv + dt * dz
            xv = xv + dt * dx
    return DmpRollout(t, y, yd, ydd, yddd, T)
