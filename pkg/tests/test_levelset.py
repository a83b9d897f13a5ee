import math

import numpy as np
import pytest

from levelset_lab import (
    DegenerateGradientError,
    DensityGrid,
    MeasureEvaluator,
    Point,
    TransportParams,
    circle_fit_curvature,
    cone_containment,
    curvature_at_origin,
    is_simple_arc,
    make_measure,
    sample_two_sign_change_density,
    trace_zero_set,
    transport_curvature_closed,
    transport_measure,
)
from levelset_lab.boundary_measure import TAU
from levelset_lab.extremizer import measure_normalized_extremizer, zero_curve_residual
from levelset_lab.levelset import LevelCurve, LevelSetStructureError

from test_boundary_measure import symmetric_transport


def boundary_balance_exit_angles(p: TransportParams) -> tuple[float, float]:
    """Oracle for where the interior zero arc meets the boundary.

    Near the boundary the extension has the sign of the kernel balance
    F(t) = w0/|e_t - e_0|^2 - w_a/|e_t - e_a|^2 - w_b/|e_t - e_b|^2, so the
    arc through the origin lands at the two roots bracketing angle 0.
    """
    from scipy.optimize import brentq

    w_a, w_b = p.weights()

    def F(t):
        return (1.0 / (2 - 2 * math.cos(t))
                - w_a / (2 - 2 * math.cos(t - p.a))
                - w_b / (2 - 2 * math.cos(t - p.b)))

    lo = brentq(F, p.a + 1e-4, -1e-4, xtol=1e-12)
    hi = brentq(F, 1e-4, p.b - 1e-4, xtol=1e-12)
    return lo, hi


class TestTraceTransport:
    def test_symmetric_arc(self):
        m = symmetric_transport()
        curve = trace_zero_set(m)
        assert not curve.closed and not curve.saddle and not curve.capped
        assert is_simple_arc(curve)
        ex = sorted(curve.exit_angles)
        # the arc lands where the near-boundary kernel balance flips sign:
        # cos(t)^2 = 1 - cos(t), i.e. t = +-acos((sqrt(5)-1)/2)
        t_star = math.acos((math.sqrt(5) - 1) / 2)
        assert ex[0] == pytest.approx(-t_star, abs=5e-3)
        assert ex[1] == pytest.approx(t_star, abs=5e-3)

    def test_exit_angles_match_balance_oracle(self):
        for (a, b) in [(-2.0, 1.0), (-0.8, 2.2), (-1.4, 1.4)]:
            p = TransportParams(a, b)
            curve = trace_zero_set(transport_measure(p))
            lo, hi = boundary_balance_exit_angles(p)
            ex = sorted(curve.exit_angles)
            assert ex[0] == pytest.approx(lo, abs=5e-3)
            assert ex[1] == pytest.approx(hi, abs=5e-3)

    def test_points_on_level_set(self):
        m = symmetric_transport()
        ev = MeasureEvaluator(m)
        curve = trace_zero_set(m)
        for p in curve.points:
            u, gx, gy = ev.value_and_grad(p)
            assert abs(u) <= 1e-9 * math.hypot(gx, gy)

    def test_point_spacing_and_radius(self):
        curve = trace_zero_set(symmetric_transport())
        pts = curve.points
        for a, b in zip(pts, pts[1:]):
            assert math.hypot(b.x - a.x, b.y - a.y) <= 2.0e-2 + 1e-12
        assert max(p.radius() for p in pts) <= 0.999 + 1e-12

    def test_circle_fit_cross_check(self):
        for (a, b) in [(-1.2, 0.9), (-2.0, 2.0), (-0.6, 0.4)]:
            p = TransportParams(a, b)
            curve = trace_zero_set(transport_measure(p))
            kappa = transport_curvature_closed(p)
            assert circle_fit_curvature(curve) == pytest.approx(kappa, rel=0.02)

    def test_straight_chord(self):
        # antisymmetric atom pair: zero second-order terms, level set is
        # the horizontal diameter
        m = make_measure([(math.pi / 2, 1.0), (-math.pi / 2, -1.0)])
        curve = trace_zero_set(m)
        assert max(abs(p.y) for p in curve.points) <= 1e-6
        ex = sorted(curve.exit_angles)
        assert ex[0] == pytest.approx(0.0, abs=5e-3)
        assert ex[1] == pytest.approx(math.pi, abs=5e-3)

    def test_degenerate_gradient_raises(self):
        m = make_measure([(math.pi / 2, 1.0), (-math.pi / 2, 1.0)])
        with pytest.raises(DegenerateGradientError):
            trace_zero_set(m)

    def test_extremizer_algebraic_curve(self):
        curve = trace_zero_set(measure_normalized_extremizer())
        assert is_simple_arc(curve)
        worst = max(abs(zero_curve_residual(p)) for p in curve.points)
        assert worst <= 1e-6
        near_half = [p for p in curve.points if abs(p.x - 0.5) < 2e-2]
        assert near_half
        for p in near_half:
            want = math.sqrt(p.x * (1 - p.x) ** 2 / (4 - p.x))
            assert abs(p.y) == pytest.approx(want, abs=1e-8)


class TestSimpleArc:
    def test_transport_curve_is_simple(self):
        assert is_simple_arc(trace_zero_set(symmetric_transport()))

    def test_closed_square_is_not(self):
        sq = [Point(0, 0), Point(1, 0), Point(1, 1), Point(0, 1)]
        assert not is_simple_arc(LevelCurve(points=sq, closed=True,
                                            exit_angles=None))

    def test_two_point_curve(self):
        c = LevelCurve(points=[Point(0, 0), Point(0.1, 0)], closed=False,
                       exit_angles=None)
        assert is_simple_arc(c)

    def test_figure_eight_detected(self):
        # crossing polyline; cross-check shapely against a brute-force
        # segment-pair sweep
        pts = [Point(-1, -1), Point(1, 1), Point(1, -1), Point(-1, 1)]
        c = LevelCurve(points=pts, closed=False, exit_angles=None)
        assert not is_simple_arc(c)

        def brute_force_simple(points):
            segs = list(zip(points, points[1:]))
            def cross(o, a, b):
                return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
            for i in range(len(segs)):
                for j in range(i + 2, len(segs)):
                    p1, p2 = segs[i]
                    q1, q2 = segs[j]
                    d1 = cross(p1, p2, q1)
                    d2 = cross(p1, p2, q2)
                    d3 = cross(q1, q2, p1)
                    d4 = cross(q1, q2, p2)
                    if d1 * d2 < 0 and d3 * d4 < 0:
                        return False
            return True

        assert not brute_force_simple(pts)
        good = trace_zero_set(symmetric_transport()).points
        assert brute_force_simple(good)


class TestConeContainment:
    def grid(self, fn, n=512):
        t = -math.pi + TAU / n * np.arange(n)
        return DensityGrid(n, fn(t))

    def test_plain_cosine(self):
        assert cone_containment(self.grid(np.cos))

    def test_rotated_cosine(self):
        assert cone_containment(self.grid(lambda t: np.cos(t - 1.0)))

    def test_negative_at_zero_rejected(self):
        with pytest.raises(LevelSetStructureError):
            cone_containment(self.grid(lambda t: -np.cos(t)))

    def test_four_sign_changes_rejected(self):
        with pytest.raises(LevelSetStructureError):
            cone_containment(self.grid(lambda t: np.cos(2 * t)))

    def test_nonzero_mean_rejected(self):
        with pytest.raises(LevelSetStructureError):
            cone_containment(self.grid(lambda t: np.cos(t) + 0.1))

    def test_random_two_sign_change_densities(self):
        for i in range(200):
            d = sample_two_sign_change_density((555, i))
            assert cone_containment(d), f"violation at sample {i}"


class TestClosedLevelSet:
    def test_single_atom_level_circle(self):
        # {u = u(0)} of one positive atom is the circle through the origin
        # tangent to the boundary; the tracer follows it to the stop radius
        m = make_measure([(0.0, 1.0)])
        curve = trace_zero_set(m)
        assert is_simple_arc(curve)
        assert circle_fit_curvature(curve) == pytest.approx(2.0, rel=1e-3)
        # all points lie on the circle |p - (1/2, 0)| = 1/2
        for p in curve.points:
            assert math.hypot(p.x - 0.5, p.y) == pytest.approx(0.5, abs=1e-9)
