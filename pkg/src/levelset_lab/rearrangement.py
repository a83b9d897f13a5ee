"""Mass-transport rearrangement of boundary densities, step by step.

Two desk-scale processes are implemented on top of the transport maps:

* ``run_rearrangement`` concentrates the positive part of a density onto
  a pivot atom by repeatedly pairing the outermost positive bins on
  opposite sides of the pivot and applying one transport map per pair.
  Each step zeroes at least one bin, conserves total mass exactly, and
  changes the origin curvature by the weighted-average law
  kappa_new = (sigma*kappa + sigma_g*kappa_g)/(sigma + sigma_g).

* ``run_eps_rearrangement`` starts from a measure of the reduced form
  (positive atom at angle 0, nonpositive density vanishing around 0) and
  moves the negative mass symmetrically onto atoms at +-eps, halving eps
  between rounds.  Curvature rises toward the sharp bound 8 and must
  never exceed it.

Bins are treated as atoms at their node angle when transported, which
under the nodewise quadrature is exactly jet-preserving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boundary_measure import (
    Atom,
    BoundaryMeasure,
    DensityGrid,
    TAU,
    make_measure,
    moment_vector,
    wrap_angle,
)
from .curvature import signed_curvature
from .poisson_eval import Jet2
from .transport_maps import TransportParams

PIVOT_TOLERANCE = 1e-10
ALIGNMENT_TOLERANCE = 1e-8
CURVATURE_BOUND_SLACK = 1e-8


class PivotNotFoundError(RuntimeError):
    """The gradient-alignment function has no root in the scanned range."""


class CurvatureBoundError(RuntimeError):
    """A rearrangement step exceeded the curvature bound; should not happen."""

    def __init__(self, kappa: float, step: int):
        super().__init__(f"kappa = {kappa!r} above 8 at step {step}")
        self.kappa = kappa
        self.step = step


@dataclass(frozen=True)
class PivotResult:
    t_star: float
    alignment_residual: float


@dataclass
class RearrangementStep:
    index: int
    sigma: float
    kappa: float
    off_target_mass: float
    snapshot_id: int
    grad_angle: float
    aligned: bool
    law_residual: float


@dataclass
class RearrangementTrace:
    steps: list[RearrangementStep]
    terminal_measure: BoundaryMeasure
    stalled: bool = False
    stall_reason: str | None = None
    snapshots: list[BoundaryMeasure] = field(default_factory=list)


def _positivity_interval(grid: DensityGrid) -> tuple[float, float]:
    """Endpoints (a, b) of the single positivity run, a < 0 < b."""
    vals = grid.values
    n = grid.n
    mask = vals > 0.0
    if not mask.any():
        raise ValueError("density has no positive part")
    if mask.all():
        raise ValueError("density has no negative part")
    # count circular runs of positive nodes
    starts = np.flatnonzero(mask & ~np.roll(mask, 1))
    if len(starts) != 1:
        raise ValueError(f"{len(starts)} positivity runs, expected one")
    t = grid.angles()
    h = grid.spacing
    start = int(starts[0])
    length = int(mask.sum())
    end = (start + length - 1) % n
    # interpolated roots just outside the run, in unwrapped coordinates
    i_prev = (start - 1) % n
    lam_a = vals[i_prev] / (vals[i_prev] - vals[start])
    a = float(t[start] - h + lam_a * h)
    i_next = (end + 1) % n
    lam_b = vals[end] / (vals[end] - vals[i_next])
    b = float(t[end] + lam_b * h)
    if end < start:
        b += TAU
    if not (a < 0.0 < b):
        raise ValueError(f"positivity interval ({a:.4f}, {b:.4f}) misses 0")
    return a, b


def claim2_pivot(m: BoundaryMeasure,
                 tolerance: float = PIVOT_TOLERANCE) -> PivotResult:
    """Concentration angle whose measure keeps the origin gradient direction.

    For a density with one positivity interval (a, b) around 0, replaces
    the positive part by an atom at angle t and bisects on t until the
    gradient of the replaced measure is parallel to the original one.
    """
    if m.atoms:
        raise ValueError("pivot search expects a pure-density measure")
    if m.density is None:
        raise ValueError("pivot search needs a density")
    a, b = _positivity_interval(m.density)
    grid = m.density
    t = grid.angles()
    h = grid.spacing
    pos = np.maximum(grid.values, 0.0)
    neg = np.minimum(grid.values, 0.0)
    P = float(pos.sum() * h)
    neg_mx = float(np.dot(neg, np.cos(t)) * h)
    neg_my = float(np.dot(neg, np.sin(t)) * h)
    mx, my = moment_vector(m)

    def psi(tt: float) -> float:
        vx = P * math.cos(tt) + neg_mx
        vy = P * math.sin(tt) + neg_my
        return math.atan2(mx * vy - my * vx, mx * vx + my * vy)

    lo, hi = a + 1e-9 * (b - a), b - 1e-9 * (b - a)
    flo, fhi = psi(lo), psi(hi)
    if flo == 0.0:
        return PivotResult(lo, 0.0)
    if fhi == 0.0:
        return PivotResult(hi, 0.0)
    if math.copysign(1.0, flo) == math.copysign(1.0, fhi):
        # scan for a bracket before giving up
        ts = np.linspace(lo, hi, 257)
        fs = [psi(float(x)) for x in ts]
        bracket = None
        for i in range(len(ts) - 1):
            if math.copysign(1.0, fs[i]) != math.copysign(1.0, fs[i + 1]):
                bracket = (float(ts[i]), float(ts[i + 1]), fs[i])
                break
        if bracket is None:
            raise PivotNotFoundError(
                f"no sign change of the alignment function on ({a:.4f}, {b:.4f})"
            )
        lo, hi, flo = bracket
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = psi(mid)
        if abs(fm) <= tolerance or hi - lo < 1e-15:
            if abs(fm) <= tolerance:
                return PivotResult(mid, abs(fm))
            break
        if math.copysign(1.0, fm) == math.copysign(1.0, flo):
            lo, flo = mid, fm
        else:
            hi = mid
    mid = 0.5 * (lo + hi)
    res = abs(psi(mid))
    if res > tolerance:
        raise PivotNotFoundError(f"bisection stalled with residual {res:.3e}")
    return PivotResult(mid, res)


class _State:
    """Mutable atoms + density working copy with O(n) origin moments."""

    def __init__(self, m: BoundaryMeasure):
        if m.density is None:
            raise ValueError("rearrangement needs a density grid")
        self.grid_n = m.density.n
        self.spacing = m.density.spacing
        self.t = m.density.angles()
        self.vals = m.density.values.copy()
        self.atoms: dict[float, float] = {}
        for a in m.atoms:
            self.atoms[a.angle] = self.atoms.get(a.angle, 0.0) + a.weight
        self._cos = np.cos(self.t)
        self._sin = np.sin(self.t)
        self._cos2 = np.cos(2.0 * self.t)
        self._sin2 = np.sin(2.0 * self.t)

    def node_index(self, angle: float) -> int:
        return int(round((angle + math.pi) / self.spacing)) % self.grid_n

    def add_atom(self, angle: float, weight: float) -> None:
        key = wrap_angle(angle)
        self.atoms[key] = self.atoms.get(key, 0.0) + weight

    def measure(self) -> BoundaryMeasure:
        return make_measure(
            [(a, w) for a, w in self.atoms.items()],
            DensityGrid(self.grid_n, self.vals.copy()),
        )

    def origin_jet(self) -> Jet2:
        h = self.spacing
        mass = float(self.vals.sum() * h)
        mx = float(np.dot(self.vals, self._cos) * h)
        my = float(np.dot(self.vals, self._sin) * h)
        c2 = float(np.dot(self.vals, self._cos2) * h)
        s2 = float(np.dot(self.vals, self._sin2) * h)
        for ang, w in self.atoms.items():
            mass += w
            mx += w * math.cos(ang)
            my += w * math.sin(ang)
            c2 += w * math.cos(2.0 * ang)
            s2 += w * math.sin(2.0 * ang)
        return Jet2(mass / TAU, mx / math.pi, my / math.pi,
                    2.0 * c2 / math.pi, 2.0 * s2 / math.pi, -2.0 * c2 / math.pi)


def _atoms_jet(atoms: list[tuple[float, float]]) -> Jet2:
    mass = mx = my = c2 = s2 = 0.0
    for ang, w in atoms:
        mass += w
        mx += w * math.cos(ang)
        my += w * math.sin(ang)
        c2 += w * math.cos(2.0 * ang)
        s2 += w * math.sin(2.0 * ang)
    return Jet2(mass / TAU, mx / math.pi, my / math.pi,
                2.0 * c2 / math.pi, 2.0 * s2 / math.pi, -2.0 * c2 / math.pi)


def sweep_pair_step(m: BoundaryMeasure, left: float, right: float,
                    pivot: float) -> BoundaryMeasure:
    """One transport increment: drain the bins at ``left`` and ``right``.

    Adds intensity * mu_{left-pivot, right-pivot} expressed in the pivot
    frame, with the intensity chosen to zero at least one of the two bins;
    the removed positive mass lands on the pivot atom and total mass is
    unchanged.
    """
    state = _State(m)
    _pair_step(state, left, right, pivot)
    return state.measure()


def _pair_step(state: _State, left: float, right: float,
               pivot: float) -> list[tuple[float, float]]:
    """Apply one pair transport in place; returns the added measure's atoms."""
    il = state.node_index(left)
    ir = state.node_index(right)
    a_rel = wrap_angle(state.t[il] - pivot)
    b_rel = wrap_angle(state.t[ir] - pivot)
    if not (-math.pi < a_rel < 0.0 < b_rel < math.pi):
        raise ValueError(
            f"pair angles ({a_rel:.4f}, {b_rel:.4f}) invalid in pivot frame"
        )
    vl, vr = state.vals[il], state.vals[ir]
    if vl <= 0.0 or vr <= 0.0:
        raise ValueError("both pair bins must hold positive density")
    w_a, w_b = TransportParams(a_rel, b_rel).weights()
    h = state.spacing
    ra = vl * h / w_a
    rb = vr * h / w_b
    intensity = min(ra, rb)
    if ra == rb:
        state.vals[il] = 0.0
        state.vals[ir] = 0.0
    elif ra < rb:
        state.vals[il] = 0.0
        state.vals[ir] = vr - w_b * intensity / h
    else:
        state.vals[ir] = 0.0
        state.vals[il] = vl - w_a * intensity / h
    state.add_atom(pivot, intensity)
    return [
        (wrap_angle(pivot), intensity),
        (float(state.t[il]), -w_a * intensity),
        (float(state.t[ir]), -w_b * intensity),
    ]


def _law_fields(prev_jet: Jet2, new_jet: Jet2,
                added: list[tuple[float, float]] | None):
    """Alignment flag and weighted-average-law residual for one step.

    The law is checked in the +x frame with signed x-gradients, so it also
    covers added maps whose gradient points along -x.
    """
    if added is None:
        return True, abs(signed_curvature(new_jet) - signed_curvature(prev_jet))
    g = _atoms_jet(added)
    sx_p, sx_g = prev_jet.ux, g.ux
    collinear = (
        abs(prev_jet.uy) <= ALIGNMENT_TOLERANCE * max(abs(sx_p), 1e-300)
        and abs(g.uy) <= ALIGNMENT_TOLERANCE * max(abs(sx_g), 1e-300)
        and sx_p > 0.0
    )
    if not collinear or sx_p + sx_g == 0.0:
        return False, float("nan")
    kappa_p = -prev_jet.uyy / sx_p
    kappa_g = -g.uyy / sx_g
    kappa_pred = (sx_p * kappa_p + sx_g * kappa_g) / (sx_p + sx_g)
    return True, abs(-new_jet.uyy / new_jet.ux - kappa_pred)


def _record(trace: RearrangementTrace, state: _State, index: int,
            off: float, keep: bool, prev_jet: Jet2 | None,
            added: list[tuple[float, float]] | None,
            enforce_bound: bool) -> Jet2:
    jet = state.origin_jet()
    sigma = jet.grad_norm()
    kappa = signed_curvature(jet)
    aligned, residual = (True, 0.0) if prev_jet is None else _law_fields(
        prev_jet, jet, added
    )
    if enforce_bound and kappa > 8.0 + CURVATURE_BOUND_SLACK:
        raise CurvatureBoundError(kappa, index)
    snap_id = index
    if keep:
        trace.snapshots.append(state.measure())
        snap_id = len(trace.snapshots) - 1
    trace.steps.append(RearrangementStep(
        index=index, sigma=sigma, kappa=kappa, off_target_mass=off,
        snapshot_id=snap_id, grad_angle=jet.grad_angle(),
        aligned=aligned, law_residual=residual,
    ))
    return jet


def run_rearrangement(m: BoundaryMeasure, max_steps: int | None = None,
                      tol: float = 1e-10,
                      keep_snapshots: bool = False) -> RearrangementTrace:
    """Drain the positive density onto the pivot atom at angle 0.

    The caller is expected to have rotated the measure so the pivot from
    :func:`claim2_pivot` sits at angle 0.  Greedy schedule: the outermost
    positive bins on opposite sides are paired each step; a bin exactly at
    the pivot transfers directly (jet-preserving).  Terminates when the
    off-pivot positive mass falls below ``tol`` times its initial value,
    stalls (with the flag set) when only one side retains positive mass.
    """
    state = _State(m)
    if max_steps is None:
        max_steps = 4 * state.grid_n
    h = state.spacing

    def off_mass() -> float:
        return float(np.maximum(state.vals, 0.0).sum() * h)

    trace = RearrangementTrace(steps=[], terminal_measure=m)
    initial = off_mass()
    if initial == 0.0:
        _record(trace, state, 0, 0.0, keep_snapshots, None, None, False)
        trace.terminal_measure = state.measure()
        return trace
    prev_jet = _record(trace, state, 0, initial, keep_snapshots, None, None,
                       False)
    pivot_idx = state.node_index(0.0)
    pivot_is_node = abs(state.t[pivot_idx]) < 0.25 * h
    index = 0
    while index < max_steps:
        index += 1
        added = None
        if pivot_is_node and state.vals[pivot_idx] > 0.0:
            # bin at the pivot: direct transfer, identical jet
            state.add_atom(float(state.t[pivot_idx]),
                           state.vals[pivot_idx] * h)
            state.vals[pivot_idx] = 0.0
        else:
            pos = state.vals > 0.0
            left = np.flatnonzero(pos & (state.t < 0.0) & (state.t > -math.pi))
            right = np.flatnonzero(pos & (state.t > 0.0))
            if len(left) == 0 and len(right) == 0:
                break
            if len(left) == 0 or len(right) == 0:
                if off_mass() > tol * initial:
                    trace.stalled = True
                    trace.stall_reason = "positive mass left on one side only"
                break
            if state.vals[0] > 0.0 and state.t[0] == -math.pi:
                trace.stalled = True
                trace.stall_reason = "positive mass at the antipode"
                break
            il = int(left[0])
            ir = int(right[-1])
            added = _pair_step(state, float(state.t[il]), float(state.t[ir]),
                               0.0)
        off = off_mass()
        prev_jet = _record(trace, state, index, off, keep_snapshots, prev_jet,
                           added, False)
        if off <= tol * initial:
            break
    else:
        if off_mass() > tol * initial:
            trace.stalled = True
            trace.stall_reason = "max steps reached"
    trace.terminal_measure = state.measure()
    return trace


def _eps_pair_step(state: _State, carrier_left, carrier_right,
                   eps: float) -> list[tuple[float, float]]:
    """Move negative mass from two carriers symmetrically onto +-eps."""
    (kind_l, key_l, ang_l, mass_l) = carrier_left
    (kind_r, key_r, ang_r, mass_r) = carrier_right
    params = TransportParams(ang_l, ang_r, eps)
    w_a, w_b = params.weights()
    ra = -mass_l / (2.0 * w_a)
    rb = -mass_r / (2.0 * w_b)
    intensity = min(ra, rb)  # positive
    c = -intensity

    def deposit(kind, key, delta):
        if kind == "bin":
            state.vals[key] += delta / state.spacing
        else:
            state.atoms[key] = state.atoms.get(key, 0.0) + delta

    if ra == rb:
        deposit(kind_l, key_l, -mass_l)
        deposit(kind_r, key_r, -mass_r)
    elif ra < rb:
        deposit(kind_l, key_l, -mass_l)
        deposit(kind_r, key_r, 2.0 * w_b * intensity)
    else:
        deposit(kind_r, key_r, -mass_r)
        deposit(kind_l, key_l, 2.0 * w_a * intensity)
    if kind_l == "bin" and ra <= rb:
        state.vals[key_l] = 0.0
    if kind_r == "bin" and rb <= ra:
        state.vals[key_r] = 0.0
    state.add_atom(eps, c)
    state.add_atom(-eps, c)
    return [
        (wrap_angle(eps), c),
        (wrap_angle(-eps), c),
        (ang_l, 2.0 * w_a * intensity),
        (ang_r, 2.0 * w_b * intensity),
    ]


def _antipode_step(state: _State, carrier, eps: float):
    """Empty the carrier at the antipode symmetrically onto +-eps.

    Limiting case of the symmetric split map as both removal angles reach
    the antipode: delta_eps + delta_{-eps} - 2*delta_pi, whose curvature
    4*(1 - cos eps) stays below 8.
    """
    kind, key, ang, mass = carrier
    c = 0.5 * mass  # negative
    if kind == "bin":
        state.vals[key] = 0.0
    else:
        state.atoms[key] = 0.0
    state.add_atom(eps, c)
    state.add_atom(-eps, c)
    return [
        (wrap_angle(eps), c),
        (wrap_angle(-eps), c),
        (math.pi, -mass),
    ]


def run_eps_rearrangement(m: BoundaryMeasure, eps0: float, rounds: int,
                          tol: float = 1e-12,
                          max_steps: int | None = None,
                          keep_snapshots: bool = False) -> RearrangementTrace:
    """Symmetric eps-halving transport of the negative mass.

    Starting from the reduced form (positive atom at 0, nonpositive
    density vanishing on an interval around 0), round r moves all
    negative mass onto atoms at +-eps0/2^r, then halves eps.  Curvature
    is recorded every step and must stay at or below 8 (within slack);
    a violation raises :class:`CurvatureBoundError`.
    """
    state = _State(m)
    if rounds < 0:
        raise ValueError("rounds must be nonnegative")
    if max_steps is None:
        max_steps = 4 * state.grid_n + 8 * max(rounds, 1)
    if float(np.max(state.vals)) > 0.0:
        raise ValueError("density must be nonpositive in the reduced form")
    pos_atoms = [a for a, w in state.atoms.items() if w > 0.0]
    if pos_atoms != [0.0]:
        raise ValueError("expected exactly one positive atom at angle 0")

    h = state.spacing

    def carriers(eps: float):
        """Negative-mass holders not yet at the current targets."""
        out = []
        neg_bins = np.flatnonzero(state.vals < 0.0)
        for k in neg_bins:
            out.append(("bin", int(k), float(state.t[k]),
                        float(state.vals[k] * h)))
        for ang, w in state.atoms.items():
            if w < 0.0 and ang not in (wrap_angle(eps), wrap_angle(-eps)):
                out.append(("atom", ang, ang, w))
        return out

    def off_mass(eps: float) -> float:
        return -sum(c[3] for c in carriers(eps))

    # admissibility of the whole eps schedule against the vanishing gap
    gap = math.pi
    for _, _, ang, _ in carriers(eps0):
        a = wrap_angle(ang)
        if a == math.pi:
            continue
        gap = min(gap, abs(a))
    if not (0.0 < eps0 < gap):
        raise ValueError(
            f"eps0 = {eps0} must lie in (0, {gap:.4f}), inside the vanishing gap"
        )

    trace = RearrangementTrace(steps=[], terminal_measure=m)
    initial = off_mass(eps0)
    prev_jet = _record(trace, state, 0, initial, keep_snapshots, None, None,
                       False)
    index = 0
    for r in range(rounds):
        eps = eps0 * 0.5 ** r
        while index < max_steps:
            cs = carriers(eps)
            if not cs:
                break
            anti = [c for c in cs if wrap_angle(c[2]) == math.pi]
            lefts = [c for c in cs
                     if -math.pi < c[2] < 0.0 and wrap_angle(c[2]) != math.pi]
            rights = [c for c in cs if 0.0 < c[2] < math.pi]
            index += 1
            if anti:
                added = _antipode_step(state, anti[0], eps)
            elif lefts and rights:
                left = min(lefts, key=lambda c: c[2])
                right = max(rights, key=lambda c: c[2])
                added = _eps_pair_step(state, left, right, eps)
            else:
                if off_mass(eps) > tol * max(initial, 1e-300):
                    trace.stalled = True
                    trace.stall_reason = "negative mass left on one side only"
                break
            off = off_mass(eps)
            prev_jet = _record(trace, state, index, off, keep_snapshots,
                               prev_jet, added, True)
        if trace.stalled or index >= max_steps:
            if index >= max_steps and off_mass(eps) > tol * max(initial, 1e-300):
                trace.stalled = True
                trace.stall_reason = trace.stall_reason or "max steps reached"
            break
    trace.terminal_measure = state.measure()
    return trace


def trace_to_rows(trace: RearrangementTrace) -> list[tuple[int, float, float, float]]:
    """Rows (step, sigma, kappa, off_target_mass) for CSV export."""
    return [(s.index, s.sigma, s.kappa, s.off_target_mass)
            for s in trace.steps]
