import math

import numpy as np
import pytest

from levelset_lab import (
    DensityGrid,
    PivotNotFoundError,
    claim2_pivot,
    curvature_at_origin,
    make_measure,
    origin_jet_closed,
    run_eps_rearrangement,
    run_rearrangement,
    sample_claim2_measure,
    signed_curvature,
    sweep_pair_step,
    total_mass,
)
from levelset_lab.boundary_measure import TAU


def worked_f_class(n=256, balanced=True):
    """Positive atom at 0 against the clipped negative cosine."""
    t = -math.pi + TAU / n * np.arange(n)
    grid = DensityGrid(n, np.minimum(np.cos(t), 0.0))
    weight = -grid.mass() if balanced else 2.0
    return make_measure([(0.0, weight)], grid)


class TestPivot:
    def test_even_density_pivots_at_zero(self):
        m = sample_claim2_measure(7, n=256)
        res = claim2_pivot(m)
        assert res.t_star == pytest.approx(0.0, abs=1e-12)
        assert res.alignment_residual <= 1e-10

    def test_shifted_cosine(self):
        n = 1024
        t = -math.pi + TAU / n * np.arange(n)
        m = make_measure([], DensityGrid(n, np.cos(t - 0.3)))
        res = claim2_pivot(m)
        assert res.t_star == pytest.approx(0.3, abs=1e-6)
        assert res.alignment_residual <= 1e-10

    def test_no_positive_part_rejected(self):
        n = 64
        m = make_measure([], DensityGrid(n, -np.ones(n)))
        with pytest.raises(ValueError):
            claim2_pivot(m)

    def test_atoms_rejected(self):
        n = 64
        t = -math.pi + TAU / n * np.arange(n)
        m = make_measure([(0.0, 1.0)], DensityGrid(n, np.cos(t)))
        with pytest.raises(ValueError):
            claim2_pivot(m)


class TestPairStep:
    def test_symmetric_conservation(self):
        m = sample_claim2_measure(3, n=256)
        t = m.density.angles()
        pos = np.flatnonzero(m.density.values > 0)
        left = float(t[pos[t[pos] < 0][0]])
        right = float(t[pos[t[pos] > 0][-1]])
        removed = (m.density.values[m.density.angles() == left][0]
                   + m.density.values[m.density.angles() == right][0]) \
            * m.density.spacing
        m2 = sweep_pair_step(m, left, right, 0.0)
        assert total_mass(m2) == pytest.approx(total_mass(m), abs=1e-14)
        gain = {a.angle: a.weight for a in m2.atoms}[0.0]
        assert gain == pytest.approx(removed, abs=1e-14)

    def test_empty_bin_rejected(self):
        m = sample_claim2_measure(3, n=256)
        t = m.density.angles()
        neg = np.flatnonzero(m.density.values < 0)
        with pytest.raises(ValueError):
            sweep_pair_step(m, float(t[neg[0]]), 1.0, 0.0)

    def test_weighted_average_law_single_step(self):
        m = sample_claim2_measure(5, n=256)
        t = m.density.angles()
        pos = np.flatnonzero(m.density.values > 0)
        left = float(t[pos[t[pos] < 0][0]])
        right = float(t[pos[t[pos] > 0][-1]])
        m2 = sweep_pair_step(m, left, right, 0.0)
        j1, j2 = origin_jet_closed(m), origin_jet_closed(m2)
        jg = j2 + j1.scaled(-1.0)
        pred = (j1.ux * signed_curvature(j1) + jg.ux * signed_curvature(jg)) \
            / (j1.ux + jg.ux)
        assert signed_curvature(j2) == pytest.approx(pred, abs=1e-8)


class TestRunRearrangement:
    def test_even_input_drains_completely(self):
        m = sample_claim2_measure(11, n=256)
        initial_pos = float(np.maximum(m.density.values, 0).sum()
                            * m.density.spacing)
        trace = run_rearrangement(m, tol=1e-10)
        assert not trace.stalled
        assert trace.steps[-1].off_target_mass <= 1e-10 * initial_pos
        # terminal: one positive atom at 0 plus the original negative part
        term = trace.terminal_measure
        assert [a.angle for a in term.atoms] == [0.0]
        assert term.atoms[0].weight == pytest.approx(initial_pos, abs=1e-12)
        # near-mirror ties can leave one-ulp dust in a drained bin
        np.testing.assert_allclose(
            term.density.values, np.minimum(m.density.values, 0.0),
            atol=1e-12)

    def test_mass_conserved_every_step(self):
        m = sample_claim2_measure(13, n=256)
        trace = run_rearrangement(m, keep_snapshots=True)
        for snap in trace.snapshots:
            assert abs(total_mass(snap)) <= 1e-12

    def test_off_target_monotone(self):
        m = sample_claim2_measure(17, n=256)
        trace = run_rearrangement(m)
        offs = [s.off_target_mass for s in trace.steps]
        assert all(b <= a + 1e-15 for a, b in zip(offs, offs[1:]))

    def test_per_step_law_on_aligned_steps(self):
        m = sample_claim2_measure(19, n=256)
        trace = run_rearrangement(m)
        aligned = [s for s in trace.steps[1:] if s.aligned]
        assert aligned
        assert max(s.law_residual for s in aligned) <= 1e-8

    def test_kappa_bounded_by_law(self):
        for seed in (23, 29, 31):
            m = sample_claim2_measure(seed, n=256)
            trace = run_rearrangement(m)
            k0 = trace.steps[0].kappa
            bound = max(k0, 8.0) + 1e-8
            assert all(s.kappa <= bound for s in trace.steps)
            assert all(s.sigma > 0.0 for s in trace.steps)

    def test_fixed_point_for_reduced_form(self):
        m = worked_f_class()
        trace = run_rearrangement(m)
        assert len(trace.steps) == 1  # initial record only, nothing to move
        assert not trace.stalled


class TestEpsRearrangement:
    def test_worked_example_initial_kappa(self):
        # literal variant with atom weight exactly 2
        m = worked_f_class(balanced=False)
        rep = curvature_at_origin(m, "hessian")
        want = 16.0 / (3.0 * (4.0 + math.pi))
        assert rep.kappa_signed == pytest.approx(want, abs=1e-3)
        assert rep.sigma == pytest.approx((4 + math.pi) / TAU, abs=1e-3)
        # quadrature refinement tightens the anchor
        m2 = worked_f_class(n=4096, balanced=False)
        assert curvature_at_origin(m2).kappa_signed \
            == pytest.approx(want, abs=1e-6)

    def test_ascent_toward_eight(self):
        m = worked_f_class()
        rounds = 8
        trace = run_eps_rearrangement(m, 0.5, rounds)
        assert not trace.stalled
        kappas = [s.kappa for s in trace.steps]
        assert max(kappas) <= 8.0 + 1e-8
        assert all(b >= a - 1e-12 for a, b in zip(kappas, kappas[1:]))
        eps_final = 0.5 * 0.5 ** (rounds - 1)
        assert kappas[-1] == pytest.approx(4 * (1 + math.cos(eps_final)),
                                           abs=1e-6)

    def test_masses_conserved(self):
        m = worked_f_class()
        trace = run_eps_rearrangement(m, 0.5, 4, keep_snapshots=True)
        for snap in trace.snapshots:
            assert abs(total_mass(snap)) <= 1e-12

    def test_zero_rounds_identity(self):
        m = worked_f_class()
        trace = run_eps_rearrangement(m, 0.5, 0)
        assert len(trace.steps) == 1
        assert trace.terminal_measure.atoms == m.atoms

    def test_eps0_outside_gap_rejected(self):
        m = worked_f_class()
        with pytest.raises(ValueError):
            run_eps_rearrangement(m, 2.0, 1)  # gap is pi/2

    def test_positive_density_rejected(self):
        n = 64
        t = -math.pi + TAU / n * np.arange(n)
        m = make_measure([(0.0, 1.0)], DensityGrid(n, np.cos(t)))
        with pytest.raises(ValueError):
            run_eps_rearrangement(m, 0.1, 1)

    def test_terminal_structure(self):
        m = worked_f_class()
        trace = run_eps_rearrangement(m, 0.5, 3)
        atoms = {a.angle: a.weight for a in trace.terminal_measure.atoms}
        eps_final = 0.5 * 0.25
        pos = atoms.pop(0.0)
        assert pos == pytest.approx(1.99990, abs=1e-4)
        assert atoms[eps_final] == pytest.approx(-pos / 2, abs=1e-12)
        assert atoms[-eps_final] == pytest.approx(-pos / 2, abs=1e-12)
        # anything else is round-off dust from earlier rounds
        rest = sum(abs(w) for a, w in atoms.items()
                   if a not in (eps_final, -eps_final))
        assert rest <= 1e-12
        assert float(np.abs(trace.terminal_measure.density.values).max()) == 0.0


class TestAsymmetricStall:
    def test_one_sided_leftover_flags_stall(self):
        # positive lump on the right side only cannot be paired away
        n = 256
        t = -math.pi + TAU / n * np.arange(n)
        vals = np.where((t > 0.3) & (t < 0.9), 1.0, 0.0)
        vals = vals - vals.sum() / n  # zero mean, negative elsewhere
        m = make_measure([], DensityGrid(n, vals))
        trace = run_rearrangement(m, tol=1e-10)
        assert trace.stalled
        assert "one side" in trace.stall_reason
