import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from demotraj import spline


def random_curve(rng, n_ctrl=8, order=4, dim=3):
    kv = spline.make_clamped_knots(n_ctrl, order)
    P = rng.normal(size=(n_ctrl, dim))
    return spline.BSplineCurve(P, kv)


class TestKnots:
    def test_minimal_clamped_vector(self):
        assert spline.make_clamped_knots(2, 2).knots.tolist() == [0, 0, 1, 1]

    def test_bezier_degenerate_case(self):
        assert spline.make_clamped_knots(4, 4).knots.tolist() == [0, 0, 0, 0, 1, 1, 1, 1]

    def test_single_interior_knot_at_midpoint(self):
        kv = spline.make_clamped_knots(5, 4)
        assert kv.knots.tolist() == [0, 0, 0, 0, 0.5, 1, 1, 1, 1]

    def test_interior_spans_equally_spaced(self):
        kv = spline.make_clamped_knots(9, 4)
        spans = np.diff(np.unique(kv.knots))
        assert np.allclose(spans, spans[0])

    def test_too_few_control_points_rejected(self):
        with pytest.raises(ValueError):
            spline.make_clamped_knots(3, 4)


class TestBasis:
    def test_linear_hat_function(self):
        kv = spline.make_clamped_knots(2, 2)
        assert spline.basis(0, 2, 0.25, kv) == pytest.approx(0.75, abs=1e-15)

    def test_local_support(self):
        kv = spline.make_clamped_knots(8, 4)
        # first basis function vanishes past its span
        assert spline.basis(0, 4, 0.9, kv) == 0.0

    def test_last_basis_is_one_at_end(self):
        kv = spline.make_clamped_knots(6, 4)
        assert spline.basis(5, 4, 1.0, kv) == 1.0

    def test_index_out_of_range(self):
        kv = spline.make_clamped_knots(4, 4)
        with pytest.raises(ValueError):
            spline.basis(4, 4, 0.5, kv)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(min_value=0.0, max_value=1.0),
           st.integers(min_value=4, max_value=12))
    def test_partition_of_unity(self, s, n_ctrl):
        kv = spline.make_clamped_knots(n_ctrl, 4)
        total = spline.basis_matrix(kv, s).sum()
        assert abs(total - 1.0) <= 1e-12

    def test_partition_of_unity_dense(self):
        rng = np.random.default_rng(0)
        kv = spline.make_clamped_knots(9, 4)
        s = rng.uniform(0, 1, 1000)
        sums = spline.basis_matrix(kv, s).sum(axis=1)
        assert np.max(np.abs(sums - 1.0)) <= 1e-12


class TestEval:
    def test_constant_control_points(self):
        kv = spline.make_clamped_knots(6, 4)
        c = np.array([1.5, -2.0])
        curve = spline.BSplineCurve(np.tile(c, (6, 1)), kv)
        for s in (0.0, 0.3, 0.77, 1.0):
            assert np.allclose(spline.evaluate(curve, s), c, atol=1e-14)

    def test_linear_interpolation(self):
        kv = spline.make_clamped_knots(2, 2)
        curve = spline.BSplineCurve(np.array([[0.0], [1.0]]), kv)
        assert spline.evaluate(curve, 0.5)[0] == pytest.approx(0.5, abs=1e-15)

    def test_cubic_bezier_by_de_casteljau(self):
        # P = [0,0,1,1] at s=0.5: [0,.5,1] -> [.25,.75] -> .5
        kv = spline.make_clamped_knots(4, 4)
        curve = spline.BSplineCurve(np.array([[0.0], [0.0], [1.0], [1.0]]), kv)
        assert spline.evaluate(curve, 0.5)[0] == pytest.approx(0.5, abs=1e-15)

    def test_clamped_endpoint_interpolation(self):
        rng = np.random.default_rng(1)
        curve = random_curve(rng)
        assert np.max(np.abs(spline.evaluate(curve, 0.0) - curve.control_points[0])) <= 1e-12
        assert np.max(np.abs(spline.evaluate(curve, 1.0) - curve.control_points[-1])) <= 1e-12

    def test_domain_error(self):
        curve = random_curve(np.random.default_rng(2))
        with pytest.raises(ValueError):
            spline.evaluate(curve, 1.2)

    def test_convex_hull(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            curve = random_curve(rng)
            lo = curve.control_points.min(axis=0) - 1e-12
            hi = curve.control_points.max(axis=0) + 1e-12
            vals = spline.evaluate(curve, np.linspace(0, 1, 500))
            assert np.all(vals >= lo) and np.all(vals <= hi)


class TestDerivatives:
    def test_constant_curve_zero_derivative(self):
        kv = spline.make_clamped_knots(5, 4)
        curve = spline.BSplineCurve(np.ones((5, 2)), kv)
        assert np.allclose(spline.eval_derivative(curve, 0.4, 1), 0.0, atol=1e-14)

    def test_linear_segment_slope(self):
        kv = spline.make_clamped_knots(2, 2)
        curve = spline.BSplineCurve(np.array([[0.0], [2.0]]), kv)
        for s in (0.0, 0.25, 0.9):
            assert spline.eval_derivative(curve, s, 1)[0] == pytest.approx(2.0, abs=1e-14)

    def test_derivative_order_out_of_range(self):
        curve = random_curve(np.random.default_rng(4))
        with pytest.raises(ValueError):
            spline.eval_derivative(curve, 0.5, 4)

    @pytest.mark.parametrize("r", [1, 2, 3])
    def test_against_finite_differences(self, r):
        rng = np.random.default_rng(5 + r)
        curve = random_curve(rng, n_ctrl=9)
        h = 1e-6
        for s in rng.uniform(0.05, 0.95, 25):
            if r == 1:
                fd = (spline.evaluate(curve, s + h) - spline.evaluate(curve, s - h)) / (2 * h)
            else:
                fd = (spline.eval_derivative(curve, s + h, r - 1)
                      - spline.eval_derivative(curve, s - h, r - 1)) / (2 * h)
            an = spline.eval_derivative(curve, s, r)
            assert np.max(np.abs(an - fd)) <= 1e-6 * max(1.0, np.max(np.abs(fd)))


class TestDerivativeBounds:
    def test_order_zero_is_control_extrema(self):
        curve = random_curve(np.random.default_rng(6))
        lo, hi = spline.derivative_control_bounds(curve, 0)
        assert np.array_equal(lo, curve.control_points.min(axis=0))
        assert np.array_equal(hi, curve.control_points.max(axis=0))

    def test_constant_curve_zero_bounds(self):
        kv = spline.make_clamped_knots(6, 4)
        curve = spline.BSplineCurve(np.full((6, 3), 2.5), kv)
        lo, hi = spline.derivative_control_bounds(curve, 1)
        assert np.allclose(lo, 0) and np.allclose(hi, 0)

    @pytest.mark.parametrize("r", [1, 2, 3])
    def test_bounds_contain_dense_samples(self, r):
        rng = np.random.default_rng(7)
        for _ in range(5):
            curve = random_curve(rng, n_ctrl=10)
            lo, hi = spline.derivative_control_bounds(curve, r)
            vals = spline.eval_derivative(curve, np.linspace(0, 1, 10_000), r)
            assert np.all(vals <= hi + 1e-12)
            assert np.all(vals >= lo - 1e-12)

    def test_derivative_matrix_matches(self):
        curve = random_curve(np.random.default_rng(8), n_ctrl=7)
        for r in range(4):
            D = spline.derivative_matrix(curve.knots, r)
            direct = spline._derivative_data(curve, r)[0]
            assert np.allclose(D @ curve.control_points, direct, atol=1e-12)


class TestTimedTrajectory:
    def test_time_scaling_identity(self):
        rng = np.random.default_rng(9)
        curve = random_curve(rng)
        traj = spline.TimedTrajectory(curve, 2.7)
        ts = rng.uniform(0, 2.7, 100)
        for r in (1, 2, 3):
            for t in ts[:20]:
                lhs = traj.derivative(t, r)
                rhs = spline.eval_derivative(curve, t / 2.7, r) / 2.7**r
                assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(1, np.max(np.abs(rhs)))

    def test_real_time_derivative_against_finite_difference(self):
        curve = random_curve(np.random.default_rng(10))
        traj = spline.TimedTrajectory(curve, 3.0)
        for t in (0.5, 1.2, 2.4):
            h = 1e-6
            fd = (traj.sample(t + h) - traj.sample(t - h)) / (2 * h)
            assert np.max(np.abs(traj.derivative(t, 1) - fd)) <= 1e-5

    def test_duration_must_be_positive(self):
        curve = random_curve(np.random.default_rng(11))
        with pytest.raises(ValueError):
            spline.TimedTrajectory(curve, 0.0)


class TestSerialization:
    def test_round_trip_bit_faithful(self):
        rng = np.random.default_rng(12)
        curve = random_curve(rng, n_ctrl=6, dim=7)
        traj = spline.TimedTrajectory(curve, np.pi)
        text = spline.trajectory_to_json(traj)
        back = spline.trajectory_from_json(text)
        assert np.array_equal(back.curve.control_points, curve.control_points)
        assert np.array_equal(back.curve.knots.knots, curve.knots.knots)
        assert back.duration == traj.duration
        assert back.curve.knots.order == 4

    def test_seventeen_significant_digits(self):
        kv = spline.make_clamped_knots(4, 4)
        curve = spline.BSplineCurve(np.full((4, 1), 1 / 3), kv)
        text = spline.trajectory_to_json(spline.TimedTrajectory(curve, 1 / 3))
        assert "0.33333333333333331" in text

    def test_doc_is_valid_json(self):
        curve = random_curve(np.random.default_rng(13))
        doc = json.loads(spline.trajectory_to_json(spline.TimedTrajectory(curve, 1.0)))
        assert set(doc) == {"order", "knots", "control_points", "duration_s"}
