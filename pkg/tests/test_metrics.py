import numpy as np
import pytest

from demotraj import ingest, kin, metrics, spline


@pytest.fixture(scope="module")
def planar():
    return kin.load_model("planar_2r")


def cubic_curve(points):
    kv = spline.make_clamped_knots(4, 4)
    return spline.BSplineCurve(np.asarray(points, dtype=float).reshape(4, -1), kv)


class TestManj:
    def test_pure_cubic_has_jerk_six(self):
        # Bezier [0,0,0,1] is exactly s^3: third derivative 6
        traj = spline.TimedTrajectory(cubic_curve([0, 0, 0, 1]), 1.0)
        assert metrics.manj(traj) == pytest.approx(6.0, abs=1e-9)

    def test_duration_invariance(self):
        curve = cubic_curve([0, 0.2, 0.9, 1])
        a = metrics.manj(spline.TimedTrajectory(curve, 1.0))
        b = metrics.manj(spline.TimedTrajectory(curve, 2.0))
        assert a == b

    def test_recording_uses_shared_differentiation(self):
        t = np.arange(0, 2, 0.01)
        rec = ingest.DemoRecording(100.0, t, np.sin(t)[:, None])
        _, _, dddq = ingest.differentiate_noncausal(rec)
        expected = np.max(np.abs(dddq)) * rec.duration**3
        assert metrics.manj(rec) == expected

    def test_too_few_samples(self):
        rec = ingest.DemoRecording(10.0, [0.0, 0.1, 0.2], np.zeros((3, 1)))
        with pytest.raises(ValueError):
            metrics.manj(rec)

    def test_unknown_type_rejected(self):
        with pytest.raises(TypeError):
            metrics.manj(np.zeros(5))


class TestViolations:
    def test_within_limits_is_clean(self, planar):
        # gentle motion: velocity 0.3/1.0 well under the 2 rad/s bound
        traj = spline.TimedTrajectory(cubic_curve([[0, 0], [0.1, 0], [0.2, 0], [0.3, 0]]), 1.0)
        assert metrics.violations(traj, planar) == []

    def test_constructed_velocity_violation_magnitude(self, planar):
        kv = spline.make_clamped_knots(2, 2)
        curve = spline.BSplineCurve(np.array([[0.0, 0.0], [2.0, 0.0]]), kv)
        traj = spline.TimedTrajectory(curve, 0.5)  # velocity 4 vs bound 2
        out = metrics.violations(traj, planar)
        bands = {v.band for v in out}
        assert bands == {"vel"}
        peak = max(v.peak for v in out)
        assert peak == pytest.approx(2.0, abs=1e-9)

    def test_intervals_merged_disjoint_and_sorted(self, planar):
        # several bursts of joint-0 velocity above the bound
        kv = spline.make_clamped_knots(8, 4)
        P = np.zeros((8, 2))
        P[:, 0] = [0.0, 0.8, 0.8, 0.4, 0.4, 1.2, 1.2, 1.4]
        traj = spline.TimedTrajectory(spline.BSplineCurve(P, kv), 0.7)
        joint0 = [v for v in metrics.violations(traj, planar)
                  if v.band == "vel" and v.joint == 0]
        assert len(joint0) >= 2
        for v in joint0:
            assert v.t_end >= v.t_start and v.peak > 0
        for a, b in zip(joint0, joint0[1:]):
            assert b.t_start > a.t_end  # merged: no touching intervals remain

    def test_coarser_sampling_is_consistent(self, planar):
        kv = spline.make_clamped_knots(2, 2)
        curve = spline.BSplineCurve(np.array([[0.0, 0.0], [2.0, 0.0]]), kv)
        traj = spline.TimedTrajectory(curve, 0.5)
        fine = metrics.violations(traj, planar, dt=1e-3)
        coarse = metrics.violations(traj, planar, dt=2e-3)
        assert len(coarse) <= len(fine) + 1


class TestReport:
    def test_single_entry_echoes_metrics(self, planar):
        traj = spline.TimedTrajectory(cubic_curve([[0, 0], [0.1, 0], [0.2, 0], [0.3, 0]]), 1.0)
        rep = metrics.report([("only", traj)], planar)
        assert rep.rows[0][0] == "only"
        assert rep.rows[0][1] == 1.0
        assert rep.rows[0][2] == metrics.manj(traj)
        assert rep.rows[0][3] == 0

    def test_row_order_stable(self, planar):
        traj = spline.TimedTrajectory(cubic_curve([[0, 0], [0.1, 0], [0.2, 0], [0.3, 0]]), 1.0)
        rep = metrics.report([("b", traj), ("a", traj)], planar)
        assert [r[0] for r in rep.rows] == ["b", "a"]

    def test_csv_round_trip(self, planar):
        traj = spline.TimedTrajectory(cubic_curve([[0, 0], [0.1, 0], [0.2, 0], [0.3, 0]]), 1.0)
        rep = metrics.report([("x", traj), ("y", traj)], planar)
        back = metrics.report_from_csv(metrics.report_to_csv(rep))
        assert back.rows == rep.rows

    def test_empty_report_rejected(self):
        with pytest.raises(ValueError):
            metrics.ComparisonReport([])
