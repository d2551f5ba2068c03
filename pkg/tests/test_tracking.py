import numpy as np
import pytest

from homtrack import (HomotopyMap, Problem, SpdMatrix, TrackerConfig,
                      TrackPoint, cross_lambda1, hermite_predict,
                      normal_flow_correct, ode_track, pc_track, registry_get,
                      tangent)
from homtrack.tracking import (STATUS_EXHAUSTED, STATUS_RANK, STATUS_REACHED,
                               RankDeficientError, checkpoint_scan)

RNG = np.random.default_rng(11)

LINE = Problem(dim=1, f=lambda x: x - 2.0, jac=lambda x: np.eye(1), name="line")


def line_fph():
    return HomotopyMap(kind="fph", problem=LINE, anchor=np.zeros(1))


def nfph(pid, alpha, anchor=None):
    p = registry_get(pid)
    a = np.zeros(p.dim) if anchor is None else np.asarray(anchor, dtype=float)
    return HomotopyMap(kind="nfph", problem=p, anchor=a,
                       A=SpdMatrix.scaled_identity(alpha, p.dim))


class _ToyMap:
    """rho(lam, x) = x - lam; zero curve is the diagonal."""

    dim = 1
    anchor = np.zeros(1)
    problem = Problem(dim=1, f=lambda x: x - 1.0, jac=lambda x: np.eye(1), name="toy")

    def rho(self, lam, x):
        return np.array([x[0] - lam])

    def rho_jacobian(self, lam, x):
        return np.array([[1.0, -1.0]])  # [d/dx | d/dlam]


class TestTangent:
    def test_lambda_axis(self):
        t = tangent(np.array([[0.0, 1.0]]))
        np.testing.assert_allclose(t, [1.0, 0.0], atol=1e-15)

    def test_oriented_by_lambda_sign(self):
        t = tangent(np.array([[3.0, 4.0]]))
        np.testing.assert_allclose(t, [0.8, -0.6], atol=1e-12)

    def test_acute_angle_rule(self):
        t = tangent(np.array([[3.0, 4.0]]), prev=np.array([-0.8, 0.6]))
        np.testing.assert_allclose(t, [-0.8, 0.6], atol=1e-12)

    def test_rank_deficiency(self):
        with pytest.raises(RankDeficientError):
            tangent(np.array([[0.0, 0.0]]))

    def test_degenerate_start_tiebreak(self):
        # lambda-tangent start: the fixed convention picks the negative branch
        jac = np.array([[-1.0, 0.0, 0.0], [0.0, 1.0, -1.0]])
        t = tangent(jac)
        assert abs(t[0]) <= 1e-12
        np.testing.assert_allclose(t[1:], [-1.0, -1.0] / np.sqrt(2.0), atol=1e-12)

    def test_unit_norm(self):
        for _ in range(50):
            jac = RNG.normal(size=(3, 4))
            assert abs(np.linalg.norm(tangent(jac)) - 1.0) <= 1e-12


class TestHermite:
    def test_linear_data_reproduced(self):
        d = np.array([1.0, 2.0]) / np.sqrt(5.0)
        p0 = TrackPoint(s=0.0, lam=0.0, x=np.array([0.0]), tangent=d)
        p1 = TrackPoint(s=1.0, lam=d[0], x=np.array([d[1]]), tangent=d)
        pred = hermite_predict(p0, p1, 0.7)
        np.testing.assert_allclose(pred, 1.7 * d, atol=1e-12)

    def test_zero_step_returns_p1(self):
        p0 = TrackPoint(s=0.0, lam=0.0, x=np.array([0.3]), tangent=np.array([1.0, 0.0]))
        p1 = TrackPoint(s=0.5, lam=0.4, x=np.array([0.9]),
                        tangent=np.array([0.6, 0.8]))
        np.testing.assert_array_equal(hermite_predict(p0, p1, 0.0), p1.coords)

    def test_against_basis_oracle(self):
        # curve c(s) = (s, s^3) sampled with unit tangents; compare to an
        # explicit Hermite-basis evaluation with the same inputs
        t0 = np.array([1.0, 0.0])
        t1 = np.array([1.0, 3.0]) / np.sqrt(10.0)
        p0 = TrackPoint(s=0.0, lam=0.0, x=np.array([0.0]), tangent=t0)
        p1 = TrackPoint(s=1.0, lam=1.0, x=np.array([1.0]), tangent=t1)
        h = 0.5
        tau = 1.0 + h
        basis = (
            (2 * tau**3 - 3 * tau**2 + 1) * p0.coords
            + (tau**3 - 2 * tau**2 + tau) * t0
            + (-2 * tau**3 + 3 * tau**2) * p1.coords
            + (tau**3 - tau**2) * t1
        )
        np.testing.assert_allclose(hermite_predict(p0, p1, h), basis, atol=1e-13)

    def test_rejects_bad_ordering(self):
        p = TrackPoint(s=1.0, lam=0.0, x=np.array([0.0]), tangent=np.array([1.0, 0.0]))
        with pytest.raises(ValueError):
            hermite_predict(p, p, 0.1)


class TestNormalFlow:
    def test_on_curve_no_move(self):
        cfg = TrackerConfig(strategy="pc")
        w, iters = normal_flow_correct(line_fph(), np.array([0.5, 1.0]), cfg)
        assert iters <= 1
        np.testing.assert_allclose(w, [0.5, 1.0], atol=1e-12)

    def test_min_norm_step_geometry(self):
        cfg = TrackerConfig(strategy="pc")
        w, _ = normal_flow_correct(_ToyMap(), np.array([0.5, 0.7]), cfg)
        np.testing.assert_allclose(w, [0.6, 0.6], atol=1e-12)

    def test_affine_one_iteration(self):
        cfg = TrackerConfig(strategy="pc")
        w, iters = normal_flow_correct(line_fph(), np.array([0.4, 0.9]), cfg)
        assert iters <= 2
        assert abs(w[1] - 2.0 * w[0]) <= 1e-12  # back on x = 2 lam


class TestPcTrack:
    def test_straight_line(self):
        trace = pc_track(line_fph(), cfg=TrackerConfig(strategy="pc", s_max=5.0))
        assert trace.status == STATUS_REACHED
        assert trace.steps <= 10
        assert abs(trace.hsol[0] - 2.0) <= 1e-8
        assert abs(trace.points[-1].lam - 1.0) <= 1e-9

    def test_affine_closed_form_fidelity(self):
        B = np.array([[3.0, 1.0], [1.0, 2.0]])
        c = np.array([1.0, 2.0])
        p = Problem(dim=2, f=lambda x: B @ x - c, jac=lambda x: B.copy(), name="affine")
        m = HomotopyMap(kind="nfph", problem=p, anchor=np.zeros(2),
                        A=SpdMatrix.scaled_identity(2.0, 2))
        cfg = TrackerConfig(strategy="pc", s_max=10.0)
        trace = pc_track(m, cfg=cfg)
        assert trace.status == STATUS_REACHED
        for pt in trace.points:
            xc = np.linalg.solve(B + (1 - pt.lam) * 2.0 * np.eye(2), pt.lam * c)
            assert np.max(np.abs(pt.x - xc)) <= cfg.effective_path_tol * 10

    def test_ex4_sharp_turn(self):
        m = nfph("ex4", 75.0, anchor=[0.2])
        trace = pc_track(m, cfg=TrackerConfig(strategy="pc", s_max=5.0))
        assert trace.status == STATUS_REACHED
        assert abs(trace.hsol[0]) <= 1e-3

    def test_exhausted_arclength(self):
        trace = pc_track(line_fph(), cfg=TrackerConfig(strategy="pc", s_max=1.0))
        assert trace.status == STATUS_EXHAUSTED

    def test_rank_deficient_start(self):
        class Degenerate:
            dim = 1
            anchor = np.zeros(1)
            problem = LINE

            def rho(self, lam, x):
                return np.array([(x[0] - lam) ** 2])

            def rho_jacobian(self, lam, x):
                d = 2.0 * (x[0] - lam)
                return np.array([[d, -d]])

        trace = pc_track(Degenerate(), cfg=TrackerConfig(strategy="pc"))
        assert trace.status == STATUS_RANK


class TestOdeTrack:
    def test_straight_line_checkpoint_index(self):
        # arclength to the crossing is sqrt(5); interval length 5/71
        cfg = TrackerConfig(strategy="ode", s_max=5.0, checkpoints=70)
        trace = ode_track(line_fph(), cfg=cfg)
        assert trace.status == STATUS_REACHED
        assert trace.checkpoint_hit in (31, 32, 33)
        assert abs(trace.hsol[0] - 2.0) <= 1e-6

    def test_ex1_shifted_field_is_fast(self):
        cfg = TrackerConfig(strategy="ode", s_max=2.5, checkpoints=70,
                            ode_field="adjugate")
        trace = ode_track(nfph("ex1", 50.0), cfg=cfg)
        assert trace.status == STATUS_REACHED
        assert trace.checkpoint_hit <= 5
        assert abs(trace.hsol[0] - 2.0) <= 1e-6

    def test_ex1_fph_slower_than_nfph(self):
        cfg = TrackerConfig(strategy="ode", s_max=2.5, checkpoints=70,
                            ode_field="adjugate")
        fph = ode_track(HomotopyMap(kind="fph", problem=registry_get("ex1"),
                                    anchor=np.zeros(1)), cfg=cfg)
        nf = ode_track(nfph("ex1", 50.0), cfg=cfg)
        assert fph.status == STATUS_REACHED
        assert 18 <= fph.checkpoint_hit <= 23
        assert nf.checkpoint_hit < fph.checkpoint_hit

    def test_exhausted(self):
        cfg = TrackerConfig(strategy="ode", s_max=1.0, checkpoints=10)
        trace = ode_track(line_fph(), cfg=cfg)
        assert trace.status == STATUS_EXHAUSTED
        assert trace.checkpoint_hit is None

    def test_ex3_endpoint_near_table(self):
        cfg = TrackerConfig(strategy="ode", s_max=30.0, checkpoints=50,
                            ode_field="adjugate")
        trace = ode_track(nfph("ex3", 50.0), cfg=cfg)
        assert trace.status == STATUS_REACHED
        target = np.array([1.6715543, 5.8651026, 1.3196481])
        assert np.max(np.abs(trace.hsol - target)) <= 1e-2


class TestCheckpointScan:
    def test_crossing_located(self):
        def dense(s):
            lam = 0.98 + (s - 1.0) * 0.05
            return np.array([lam, 2.0 * lam])

        cfg = TrackerConfig(strategy="ode")
        cand = checkpoint_scan(dense, 1.0, 2.0, dense(2.0), line_fph(), cfg)
        assert cand is not None and cand.kind == "crossing"
        assert abs(dense(cand.s)[0] - 1.0) <= 1e-9

    def test_no_candidate(self):
        def dense(s):
            return np.array([0.3 * s, 0.1])

        cfg = TrackerConfig(strategy="ode")
        assert checkpoint_scan(dense, 0.0, 1.0, dense(1.0), line_fph(), cfg) is None

    def test_residual_branch(self):
        def dense(s):
            return np.array([0.999, 2.0])  # residual of the target is 0 at x = 2

        cfg = TrackerConfig(strategy="ode")
        cand = checkpoint_scan(dense, 0.0, 1.0, dense(1.0), line_fph(), cfg)
        assert cand is not None and cand.kind == "residual"


class TestCrossLambda1:
    def cfg(self):
        return TrackerConfig(strategy="pc")

    def test_exact_point(self):
        before = TrackPoint(s=0.0, lam=0.9, x=np.array([1.8]),
                            tangent=np.array([1.0, 0.0]))
        after = TrackPoint(s=0.3, lam=1.0, x=np.array([2.0]),
                           tangent=np.array([1.0, 0.0]))
        hsol, flagged = cross_lambda1(before, after, line_fph(), self.cfg())
        assert not flagged
        assert abs(hsol[0] - 2.0) <= 1e-12

    def test_linear_interpolation(self):
        before = TrackPoint(s=0.0, lam=0.9, x=np.array([1.8]),
                            tangent=np.array([1.0, 0.0]))
        after = TrackPoint(s=0.5, lam=1.1, x=np.array([2.2]),
                           tangent=np.array([1.0, 0.0]))
        hsol, flagged = cross_lambda1(before, after, line_fph(), self.cfg())
        assert not flagged
        assert abs(hsol[0] - 2.0) <= 1e-10

    def test_requires_bracket(self):
        p = TrackPoint(s=0.0, lam=0.5, x=np.array([1.0]), tangent=np.array([1.0, 0.0]))
        with pytest.raises(ValueError):
            cross_lambda1(p, p, line_fph(), self.cfg())


class TestTraceInvariants:
    @pytest.mark.parametrize("strategy", ["ode", "pc"])
    @pytest.mark.parametrize("pid,alpha,sf", [("ex1", 50.0, 5.0),
                                              ("ex2", 50.0, 20.0),
                                              ("ex3", 50.0, 30.0)])
    def test_invariants_on_benchmark_runs(self, strategy, pid, alpha, sf):
        m = nfph(pid, alpha)
        cfg = TrackerConfig(strategy=strategy, s_max=sf, checkpoints=70)
        trace = pc_track(m, cfg=cfg) if strategy == "pc" else ode_track(m, cfg=cfg)
        assert trace.status == STATUS_REACHED
        pts = trace.points
        assert pts[0].lam == 0.0
        np.testing.assert_array_equal(pts[0].x, m.anchor)
        svals = [p.s for p in pts]
        assert all(b > a for a, b in zip(svals, svals[1:]))
        for p in pts:
            assert abs(np.linalg.norm(p.tangent) - 1.0) <= 1e-12
        for p, q in zip(pts, pts[1:]):
            assert float(p.tangent @ q.tangent) > 0.0
        coords = np.array([p.coords for p in pts])
        for i in range(len(coords)):
            for j in range(i + 1, len(coords)):
                assert np.max(np.abs(coords[i] - coords[j])) > 1e-12
        # monotone departure from lam = 0
        lams = [p.lam for p in pts[:3]]
        assert all(b > a for a, b in zip(lams, lams[1:]))
        # path fidelity at accepted points
        tol = cfg.effective_path_tol
        for p in pts:
            res = np.max(np.abs(m.rho(p.lam, p.x))) / (1.0 + np.linalg.norm(p.x))
            assert res <= tol
        assert abs(pts[-1].lam - 1.0) <= 1e-9
