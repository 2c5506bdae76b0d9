import numpy as np
import pytest

from demotraj import dmp


def min_jerk_profile(duration=2.0, dt=0.01, span=1.5):
    t = np.arange(0, duration + dt / 2, dt)
    u = t / duration
    return t, (span * u**3 * (10 - 15 * u + 6 * u**2))[:, None]


class TestTrain:
    def test_constant_trajectory_stays_put(self):
        t = np.arange(0, 1.0, 0.01)
        q = np.full((t.size, 2), 0.7)
        model = dmp.train(t, q)
        roll = dmp.rollout(model)
        assert np.max(np.abs(roll.y - 0.7)) <= 1e-6

    def test_reproduces_min_jerk_profile(self):
        t, q = min_jerk_profile()
        model = dmp.train(t, q)
        roll = dmp.rollout(model)
        ref = np.interp(roll.t, t, q[:, 0])
        rmse = np.sqrt(np.mean((roll.y[:, 0] - ref) ** 2))
        assert rmse <= 0.01 * np.ptp(q)

    def test_training_is_deterministic(self):
        t, q = min_jerk_profile()
        a = dmp.train(t, q)
        b = dmp.train(t, q)
        assert np.array_equal(a.weights, b.weights)

    def test_needs_enough_samples(self):
        with pytest.raises(ValueError):
            dmp.train(np.array([0.0, 0.1, 0.2]), np.zeros((3, 1)))

    def test_critical_damping_relation(self):
        t, q = min_jerk_profile()
        model = dmp.train(t, q, alpha_z=48.0)
        assert model.beta_z == 12.0


class TestRollout:
    def test_temporal_scaling_invariance(self):
        t, q = min_jerk_profile()
        model = dmp.train(t, q)
        full = dmp.rollout(model, dt=1e-3)
        half = dmp.rollout(model, duration=model.T_d / 2, dt=1e-3)
        s = np.linspace(0, 1, 400)
        yf = np.interp(s, full.t / full.duration, full.y[:, 0])
        yh = np.interp(s, half.t / half.duration, half.y[:, 0])
        assert np.max(np.abs(yf - yh)) <= 0.01 * np.ptp(q)

    def test_goal_shift_reaches_new_goal(self):
        t, q = min_jerk_profile()
        model = dmp.train(t, q)
        shifted = model.goal + np.array([0.4])
        roll = dmp.rollout(model, goal=shifted, dt=1e-3)
        assert abs(roll.y[-1, 0] - shifted[0]) <= 1e-3

    def test_converges_to_goal(self):
        # rest-to-rest demo with a mid-motion detour per joint
        t = np.arange(0, 3.0, 0.01)
        u = t / t[-1]
        warp = u**3 * (10 - 15 * u + 6 * u**2)
        detour = np.sin(np.pi * u) ** 2
        q = np.outer(warp, [0.8, -0.4, 1.2]) + np.outer(detour, [0.05, 0.03, -0.06])
        model = dmp.train(t, q)
        roll = dmp.rollout(model)
        tol = 1e-3 * np.abs(model.goal - model.y0) + 1e-6
        assert np.all(np.abs(roll.y[-1] - model.goal) <= tol)

    def test_jerk_series_matches_finite_difference(self):
        t, q = min_jerk_profile()
        model = dmp.train(t, q)
        roll = dmp.rollout(model, dt=1e-3)
        fd = np.gradient(roll.ydd[:, 0], roll.t)
        mid = slice(100, -100)
        scale = max(1.0, np.max(np.abs(fd[mid])))
        assert np.max(np.abs(roll.yddd[mid, 0] - fd[mid])) / scale <= 0.02


class TestSerialization:
    def test_round_trip(self):
        t, q = min_jerk_profile()
        model = dmp.train(t, q)
        back = dmp.DmpModel.from_dict(model.to_dict())
        assert np.array_equal(back.weights, model.weights)
        assert back.T_d == model.T_d
        a = dmp.rollout(model, dt=0.01)
        b = dmp.rollout(back, dt=0.01)
        assert np.array_equal(a.y, b.y)
