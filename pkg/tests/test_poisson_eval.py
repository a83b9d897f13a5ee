import math

import numpy as np
import pytest

from levelset_lab import (
    DensityGrid,
    EvaluationGuardError,
    MeasureEvaluator,
    Point,
    combine,
    evaluate_jet,
    kernel_jet,
    make_measure,
    origin_jet_closed,
    total_mass,
)
from levelset_lab.boundary_measure import TAU
from levelset_lab.poisson_eval import RotatedSource

from test_boundary_measure import symmetric_transport


def random_measure(rng, n_atoms=3, with_density=False):
    atoms = [(rng.uniform(-math.pi, math.pi), rng.uniform(-1.0, 1.0))
             for _ in range(n_atoms)]
    density = None
    if with_density:
        n = 64
        t = -math.pi + TAU / n * np.arange(n)
        density = DensityGrid(n, rng.normal() * np.cos(t)
                              + rng.normal() * np.sin(2 * t))
    return make_measure(atoms, density)


class TestKernelJet:
    def test_center_value(self):
        assert kernel_jet(Point(0, 0), 0.0).u == pytest.approx(1 / TAU)

    def test_half_radius_value(self):
        assert kernel_jet(Point(0.5, 0), 0.0).u == pytest.approx(3 / TAU)

    @pytest.mark.parametrize("t", [0.0, 0.7, -2.1, math.pi])
    def test_origin_derivative_closed_forms(self, t):
        j = kernel_jet(Point(0, 0), t)
        assert j.ux == pytest.approx(math.cos(t) / math.pi, abs=1e-15)
        assert j.uy == pytest.approx(math.sin(t) / math.pi, abs=1e-15)
        assert j.uxx == pytest.approx(2 * math.cos(2 * t) / math.pi, abs=1e-14)
        assert j.uxy == pytest.approx(2 * math.sin(2 * t) / math.pi, abs=1e-14)
        assert j.uyy == pytest.approx(-2 * math.cos(2 * t) / math.pi, abs=1e-14)

    def test_origin_second_derivatives_match_finite_differences(self):
        t = 0.7
        h = 1e-5
        j = kernel_jet(Point(0, 0), t)

        def u(x, y):
            return kernel_jet(Point(x, y), t).u

        uxx_fd = (u(h, 0) - 2 * u(0, 0) + u(-h, 0)) / h**2
        uyy_fd = (u(0, h) - 2 * u(0, 0) + u(0, -h)) / h**2
        uxy_fd = (u(h, h) - u(h, -h) - u(-h, h) + u(-h, -h)) / (4 * h**2)
        assert j.uxx == pytest.approx(uxx_fd, abs=1e-5)
        assert j.uyy == pytest.approx(uyy_fd, abs=1e-5)
        assert j.uxy == pytest.approx(uxy_fd, abs=1e-5)

    def test_first_derivative_fd_error_ratio(self):
        # truncation is O(h^2): errors at h and h/10 should differ ~100x
        t, p = 0.9, Point(0.45, 0.25)
        j = kernel_jet(p, t)

        def err(h):
            up = kernel_jet(Point(p.x + h, p.y), t).u
            um = kernel_jet(Point(p.x - h, p.y), t).u
            return abs((up - um) / (2 * h) - j.ux)

        ratio = err(1e-4) / err(1e-5)
        assert 50.0 < ratio < 150.0

    def test_guard_band(self):
        with pytest.raises(EvaluationGuardError) as exc:
            kernel_jet(Point(math.cos(0.3) * (1 - 1e-8),
                             math.sin(0.3) * (1 - 1e-8)), 0.3)
        assert exc.value.distance < 1e-6

    def test_guard_override(self):
        p = Point(math.cos(0.3) * (1 - 1e-8), math.sin(0.3) * (1 - 1e-8))
        j = kernel_jet(p, 0.3, guard=0.0)
        assert math.isfinite(j.u)

    def test_outside_disk_rejected(self):
        with pytest.raises(ValueError):
            kernel_jet(Point(1.0, 0.5), 0.0)

    def test_exact_harmonicity_of_closed_forms(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            r = 0.95 * math.sqrt(rng.uniform())
            th = rng.uniform(0, TAU)
            j = kernel_jet(Point(r * math.cos(th), r * math.sin(th)),
                           rng.uniform(-math.pi, math.pi), guard=0.0)
            scale = max(abs(j.uxx), abs(j.uyy), 1.0)
            assert abs(j.uxx + j.uyy) < 1e-12 * scale


class TestEvaluateJet:
    def test_unit_atom_center(self):
        m = make_measure([(0.0, 1.0)])
        assert evaluate_jet(m, Point(0, 0)).u == pytest.approx(1 / TAU)

    def test_symmetric_transport_origin(self):
        j = evaluate_jet(symmetric_transport(), Point(0, 0))
        assert j.u == pytest.approx(0.0, abs=1e-15)
        assert j.ux == pytest.approx(1 / math.pi)
        assert j.uy == pytest.approx(0.0, abs=1e-15)

    def test_zero_measure(self):
        j = evaluate_jet(make_measure([]), Point(0.3, 0.1))
        assert j.as_tuple() == (0.0,) * 6

    def test_mean_value_property(self):
        rng = np.random.default_rng(1)
        for k in range(20):
            m = random_measure(rng, with_density=(k % 2 == 0))
            u0 = evaluate_jet(m, Point(0, 0)).u
            assert u0 == pytest.approx(total_mass(m) / TAU, abs=1e-13)

    def test_linearity(self):
        rng = np.random.default_rng(2)
        p = Point(0.25, -0.35)
        for _ in range(10):
            m1 = random_measure(rng)
            m2 = random_measure(rng, with_density=True)
            c1, c2 = rng.uniform(-2, 2, size=2)
            j = evaluate_jet(combine(m1, m2, c1, c2), p)
            j1 = evaluate_jet(m1, p)
            j2 = evaluate_jet(m2, p)
            want = j1.scaled(c1) + j2.scaled(c2)
            for got_c, want_c in zip(j.as_tuple(), want.as_tuple()):
                assert got_c == pytest.approx(want_c, abs=1e-12)

    def test_fd_laplacian_small(self):
        rng = np.random.default_rng(3)
        h = 1e-3
        checked = 0
        while checked < 25:
            with_density = checked % 2 == 0
            m = random_measure(rng, with_density=with_density)
            ev = MeasureEvaluator(m)
            # density nodes cover the whole circle; keep the stencil far
            # enough that fourth derivatives do not swamp the O(h^2) bound
            r_cap = 0.65 if with_density else 0.9
            r = r_cap * math.sqrt(rng.uniform())
            th = rng.uniform(0, TAU)
            x, y = r * math.cos(th), r * math.sin(th)
            if any(math.hypot(x - math.cos(a.angle), y - math.sin(a.angle)) < 0.45
                   for a in m.atoms):
                continue
            checked += 1
            j = ev.jet(Point(x, y))
            lap = (ev.value(Point(x + h, y)) + ev.value(Point(x - h, y))
                   + ev.value(Point(x, y + h)) + ev.value(Point(x, y - h))
                   - 4 * ev.value(Point(x, y))) / h**2
            scale = 1.0 + max(abs(v) for v in j.as_tuple())
            assert abs(lap) < 1e-5 * scale

    def test_analytic_harmonicity(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            m = random_measure(rng, with_density=True)
            j = evaluate_jet(m, Point(rng.uniform(-0.6, 0.6),
                                      rng.uniform(-0.6, 0.6)))
            scale = max(abs(j.uxx), abs(j.uyy), 1.0)
            assert abs(j.uxx + j.uyy) < 1e-12 * scale


class TestOriginJetClosed:
    def test_symmetric_transport(self):
        j = origin_jet_closed(symmetric_transport())
        assert j.u == 0.0
        assert j.ux == pytest.approx(1 / math.pi)
        assert j.uy == 0.0
        assert j.uyy == pytest.approx(-4 / math.pi)
        assert j.uxx == pytest.approx(4 / math.pi)

    def test_double_atom(self):
        j = origin_jet_closed(make_measure([(0.0, 2.0)]))
        assert j.ux == pytest.approx(2 / math.pi)
        assert j.uyy == pytest.approx(-4 / math.pi)

    def test_empty(self):
        assert origin_jet_closed(make_measure([])).as_tuple() == (0.0,) * 6

    def test_matches_evaluate_jet_atomic(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            m = random_measure(rng)
            a = origin_jet_closed(m).as_tuple()
            b = evaluate_jet(m, Point(0, 0)).as_tuple()
            for x, y in zip(a, b):
                assert x == pytest.approx(y, abs=1e-12)

    def test_matches_evaluate_jet_density(self):
        n = 128
        t = -math.pi + TAU / n * np.arange(n)
        m = make_measure([], DensityGrid(n, np.exp(np.cos(t))))
        a = origin_jet_closed(m).as_tuple()
        b = evaluate_jet(m, Point(0, 0)).as_tuple()
        for x, y in zip(a, b):
            assert x == pytest.approx(y, abs=1e-12)


class TestRotatedSource:
    def test_matches_rotated_measure(self):
        from levelset_lab import rotate_measure

        m = make_measure([(0.3, 1.0), (-1.1, -0.7)])
        theta = 0.8
        rot_m = rotate_measure(m, theta)
        view = RotatedSource(MeasureEvaluator(m), theta)
        p = Point(0.2, -0.4)
        a = MeasureEvaluator(rot_m).jet(p).as_tuple()
        b = view.jet(p).as_tuple()
        for x, y in zip(a, b):
            assert x == pytest.approx(y, abs=1e-13)

    def test_origin_jet_rotation(self):
        m = symmetric_transport()
        view = RotatedSource(MeasureEvaluator(m), math.pi / 2)
        j = view.origin_jet()
        # gradient (1/pi, 0) rotates onto +y
        assert j.ux == pytest.approx(0.0, abs=1e-15)
        assert j.uy == pytest.approx(1 / math.pi)
