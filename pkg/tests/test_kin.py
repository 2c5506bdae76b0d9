import math

import numpy as np
import pytest

from demotraj import kin


@pytest.fixture(scope="module")
def planar():
    return kin.load_model("planar_2r")


@pytest.fixture(scope="module")
def fr3():
    return kin.load_model("fr3")


def quat_z(angle):
    return np.array([math.cos(angle / 2), 0.0, 0.0, math.sin(angle / 2)])


class TestForwardKinematics:
    def test_stretched_arm(self, planar):
        pose = kin.fk(planar, np.zeros(2))
        assert np.allclose(pose.p, [2.0, 0.0, 0.0], atol=1e-15)
        assert np.allclose(pose.theta, [1.0, 0.0, 0.0, 0.0], atol=1e-15)

    def test_first_joint_quarter_turn(self, planar):
        pose = kin.fk(planar, np.array([math.pi / 2, 0.0]))
        assert np.allclose(pose.p, [0.0, 2.0, 0.0], atol=1e-12)

    def test_matches_closed_form(self, planar):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            q1, q2 = rng.uniform(-math.pi, math.pi, 2)
            p = kin.fk(planar, np.array([q1, q2])).p
            expected = [math.cos(q1) + math.cos(q1 + q2),
                        math.sin(q1) + math.sin(q1 + q2), 0.0]
            assert np.max(np.abs(p - expected)) <= 1e-12

    def test_deterministic(self, fr3):
        q = np.array([0.3, -0.5, 0.2, -2.0, 0.1, 1.7, 0.9])
        a, b = kin.fk(fr3, q), kin.fk(fr3, q)
        assert np.array_equal(a.p, b.p) and np.array_equal(a.theta, b.theta)

    def test_dimension_mismatch(self, planar):
        with pytest.raises(ValueError):
            kin.fk(planar, np.zeros(3))

    def test_numerical_jacobian_finite_across_pi(self, planar):
        h = 1e-6
        for q1 in np.linspace(-math.pi, math.pi, 21):
            for q2 in (-math.pi, 0.0, math.pi):
                q = np.array([q1, q2])
                for i in range(2):
                    e = np.zeros(2)
                    e[i] = h
                    d = (kin.fk(planar, q + e).p - kin.fk(planar, q - e).p) / (2 * h)
                    assert np.all(np.isfinite(d))


class TestQuatDiff:
    def test_identity(self):
        e = np.array([1.0, 0, 0, 0])
        assert kin.quat_diff(e, e) == 0.0

    def test_double_cover(self):
        q = quat_z(1.1)
        assert kin.quat_diff(q, -q) == pytest.approx(0.0, abs=1e-12)

    def test_quarter_turn_about_z(self):
        assert kin.quat_diff(np.array([1.0, 0, 0, 0]), quat_z(math.pi / 2)) \
            == pytest.approx(math.pi / 2, abs=1e-12)

    def test_symmetric_and_triangle(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            a, b, c = (v / np.linalg.norm(v) for v in rng.normal(size=(3, 4)))
            dab, dba = kin.quat_diff(a, b), kin.quat_diff(b, a)
            assert dab == dba
            assert kin.quat_diff(a, c) <= dab + kin.quat_diff(b, c) + 1e-9

    def test_zero_iff_same_rotation(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=4)
        a /= np.linalg.norm(a)
        assert kin.quat_diff(a, a) == 0.0
        b = quat_z(0.02)
        assert kin.quat_diff(np.array([1.0, 0, 0, 0]), b) > 1e-3

    def test_non_unit_rejected(self):
        with pytest.raises(ValueError):
            kin.quat_diff(np.array([1.0, 0, 0, 0]), np.array([1.1, 0, 0, 0]))


class TestCheckLimits:
    def test_all_zero_is_feasible(self, fr3):
        z = np.zeros(7)
        q = np.clip(z, fr3.limits.q_min, fr3.limits.q_max)
        # joint 4's position band excludes zero on this model; use a feasible q
        q = (fr3.limits.q_min + fr3.limits.q_max) / 2
        assert kin.check_limits(fr3, q, z, z, z) == []

    def test_constructed_velocity_violation(self, fr3):
        z = np.zeros(7)
        q = (fr3.limits.q_min + fr3.limits.q_max) / 2
        dq = np.zeros(7)
        dq[3] = fr3.limits.v_max[3] + 0.1
        out = kin.check_limits(fr3, q, dq, z, z)
        assert len(out) == 1
        v = out[0]
        assert (v.joint, v.band) == (3, "vel")
        assert v.amount == pytest.approx(0.1, abs=1e-12)

    def test_rejection_sampled_feasible_points(self, fr3):
        rng = np.random.default_rng(3)
        lim = fr3.limits
        for _ in range(50):
            q = rng.uniform(lim.q_min, lim.q_max)
            dq = rng.uniform(lim.v_min, lim.v_max)
            ddq = rng.uniform(lim.a_min, lim.a_max)
            dddq = rng.uniform(lim.j_min, lim.j_max)
            assert kin.check_limits(fr3, q, dq, ddq, dddq) == []


class TestBatchGradients:
    def test_pose_gradients_match_finite_differences(self, fr3):
        rng = np.random.default_rng(4)
        Q = rng.uniform(fr3.limits.q_min, fr3.limits.q_max, size=(3, 7))
        R_ref = np.stack([np.eye(3)] * 3)
        p, dp, c2, dc2 = kin.batch_pose_with_grads(fr3, Q, R_ref)
        h = 1e-7
        for m in range(3):
            pose = kin.fk(fr3, Q[m])
            assert np.allclose(pose.p, p[m], atol=1e-12)
            for i in range(7):
                e = np.zeros(7)
                e[i] = h
                pp = kin.batch_pose_with_grads(fr3, (Q[m] + e)[None], R_ref[:1])
                pm = kin.batch_pose_with_grads(fr3, (Q[m] - e)[None], R_ref[:1])
                fd_p = (pp[0][0] - pm[0][0]) / (2 * h)
                fd_c = (pp[2][0] - pm[2][0]) / (2 * h)
                assert np.max(np.abs(dp[m, :, i] - fd_p)) <= 1e-5
                assert abs(dc2[m, i] - fd_c) <= 1e-5

    def test_overlap_matches_quat_diff(self, fr3):
        rng = np.random.default_rng(5)
        q = rng.uniform(fr3.limits.q_min, fr3.limits.q_max)
        qref = rng.uniform(fr3.limits.q_min, fr3.limits.q_max)
        ref_pose = kin.fk(fr3, qref)
        R_ref = kin.fk_matrix(fr3, qref)[:3, :3]
        _, _, c2, _ = kin.batch_pose_with_grads(fr3, q[None], R_ref[None])
        angle = kin.quat_diff(kin.fk(fr3, q).theta, ref_pose.theta)
        assert math.sqrt(max(c2[0], 0)) == pytest.approx(math.cos(angle / 2), abs=1e-9)


class TestModelIO:
    def test_round_trip(self, fr3):
        back = kin.model_from_dict(kin.model_to_dict(fr3))
        assert np.array_equal(back.dh_rows, fr3.dh_rows)
        assert np.array_equal(back.tool, fr3.tool)
        assert np.array_equal(back.limits.v_max, fr3.limits.v_max)

    def test_limit_band_validation(self):
        with pytest.raises(ValueError):
            kin.KinematicLimits([0], [-1], [-1], [1], [-1], [1], [-1], [1])
        with pytest.raises(ValueError):
            kin.KinematicLimits([0], [1], [0.5], [1], [-1], [1], [-1], [1])

    def test_zero_width_band_is_representable(self):
        lim = kin.KinematicLimits([-1], [1], [0], [0], [-1], [1], [-1], [1])
        assert lim.v_max[0] == 0.0
