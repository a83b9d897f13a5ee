"""Tracing the level curve through the origin and auditing its geometry.

The curve {u = u(0,0)} is followed from the origin in both directions by
predictor-corrector continuation: an Euler predictor along the tangent
(perpendicular to the gradient) followed by Newton correction along the
gradient back onto the level set.  Steps adapt to the local curvature,
h = min(step, 0.1/(1 + |kappa|)), and tracing stops at radius
``r_stop`` = 0.999 rather than touching the boundary, where atoms make
evaluation singular.

``cone_containment`` checks the moment-direction statement for
continuous zero-mean boundary densities with exactly two sign changes:
the first trigonometric moment must lie in the cone over the positivity
arc.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import LineString

from .boundary_measure import DensityGrid, TAU, wrap_angle
from .curvature import DegenerateGradientError, signed_curvature
from .poisson_eval import (
    EvaluationGuardError,
    Point,
    _origin_jet_of,
    as_jet_source,
)


class TraceError(RuntimeError):
    """Corrector failed to converge; carries the last good point."""

    def __init__(self, message: str, last_point: Point):
        super().__init__(message)
        self.last_point = last_point


class LevelSetStructureError(ValueError):
    """Density does not have the sign structure an operation requires."""


@dataclass(frozen=True)
class TraceOptions:
    step: float = 1e-2
    r_stop: float = 0.999
    newton_tol: float = 1e-12
    newton_max_iter: int = 20
    min_step: float = 1e-5
    max_arc_length: float = 8.0
    gradient_floor: float = 1e-10


@dataclass
class LevelCurve:
    """Polyline of a traced level curve, ordered by arc parameter."""

    points: list[Point]
    closed: bool
    exit_angles: tuple[float, float] | None
    saddle: bool = False
    capped: bool = False

    def arc_lengths(self) -> list[float]:
        s = [0.0]
        for a, b in zip(self.points, self.points[1:]):
            s.append(s[-1] + math.hypot(b.x - a.x, b.y - a.y))
        return s

    def coords(self) -> np.ndarray:
        return np.array([(p.x, p.y) for p in self.points])


def _value_grad(source, p: Point):
    if hasattr(source, "value_and_grad"):
        return source.value_and_grad(p)
    j = source.jet(p)
    return j.u, j.ux, j.uy


def _newton_correct(source, q: Point, u0: float, opts: TraceOptions):
    """Project q onto {u = u0} along the gradient; None on failure."""
    for _ in range(opts.newton_max_iter):
        u, gx, gy = _value_grad(source, q)
        g2 = gx * gx + gy * gy
        if g2 < opts.gradient_floor ** 2:
            return None, "saddle"
        r = u - u0
        if abs(r) <= opts.newton_tol * math.sqrt(g2):
            return q, None
        q = Point(q.x - r * gx / g2, q.y - r * gy / g2)
        if q.x * q.x + q.y * q.y >= 1.0:
            return None, "left disk"
    return None, "no convergence"


def _walk(source, u0: float, start_tangent, opts: TraceOptions):
    """Continuation in one direction; returns points after the origin."""
    p = Point(0.0, 0.0)
    tau = start_tangent
    points: list[Point] = []
    arc = 0.0
    saddle = capped = closed = False
    exit_angle = None
    while True:
        jet = source.jet(p)
        sigma = jet.grad_norm()
        if sigma < opts.gradient_floor:
            saddle = True
            break
        kappa_local = signed_curvature(jet)
        t = (-jet.uy / sigma, jet.ux / sigma)
        if t[0] * tau[0] + t[1] * tau[1] < 0.0:
            t = (-t[0], -t[1])
        tau = t
        h = min(opts.step, 0.1 / (1.0 + abs(kappa_local)))
        accepted = None
        while h >= opts.min_step:
            pred = Point(p.x + h * tau[0], p.y + h * tau[1])
            if pred.radius() >= 1.0 - 1e-9:
                h *= 0.5
                continue
            try:
                q, why = _newton_correct(source, pred, u0, opts)
            except (EvaluationGuardError, ValueError):
                q, why = None, "guard"
            if q is None:
                if why == "saddle":
                    saddle = True
                    break
                h *= 0.5
                continue
            moved = math.hypot(q.x - p.x, q.y - p.y)
            if moved > 2.0 * h or moved == 0.0:
                h *= 0.5
                continue
            if q.radius() > opts.r_stop:
                h *= 0.5
                continue
            accepted = q
            break
        if saddle:
            break
        if accepted is None:
            raise TraceError("corrector failed below minimum step", p)
        arc += math.hypot(accepted.x - p.x, accepted.y - p.y)
        tau = ((accepted.x - p.x), (accepted.y - p.y))
        norm = math.hypot(*tau)
        tau = (tau[0] / norm, tau[1] / norm)
        p = accepted
        points.append(p)
        r = p.radius()
        if r >= opts.r_stop - 2.0 * opts.min_step or opts.r_stop - r < 1e-4:
            exit_angle = math.atan2(p.y, p.x)
            break
        if arc > 3.0 * opts.step and r < opts.step / 2.0:
            closed = True
            break
        if arc > opts.max_arc_length:
            capped = True
            exit_angle = math.atan2(p.y, p.x)
            break
    return points, exit_angle, saddle, capped, closed


def trace_zero_set(obj, options: TraceOptions | None = None) -> LevelCurve:
    """Trace {u = u(0,0)} through the origin in both directions.

    Requires a transversal crossing (origin gradient above the floor).
    The two ends stop at radius ``r_stop``; their angles populate
    ``exit_angles``.  A gradient collapse along the way sets the saddle
    flag, and exceeding the arc-length cap sets ``capped``.
    """
    opts = options or TraceOptions()
    source = as_jet_source(obj)
    jet0 = _origin_jet_of(source)
    sigma0 = jet0.grad_norm()
    if sigma0 < opts.gradient_floor:
        raise DegenerateGradientError(
            f"origin gradient {sigma0:.3e} below {opts.gradient_floor:.0e}"
        )
    u0 = jet0.u
    tau0 = (-jet0.uy / sigma0, jet0.ux / sigma0)
    fwd, exit_f, sad_f, cap_f, closed_f = _walk(source, u0, tau0, opts)
    back, exit_b, sad_b, cap_b, closed_b = _walk(
        source, u0, (-tau0[0], -tau0[1]), opts
    )
    points = back[::-1] + [Point(0.0, 0.0)] + fwd
    closed = closed_f or closed_b
    exits = None
    if not closed and exit_b is not None and exit_f is not None:
        exits = (exit_b, exit_f)
    return LevelCurve(
        points=points,
        closed=closed,
        exit_angles=exits,
        saddle=sad_f or sad_b,
        capped=cap_f or cap_b,
    )


def is_simple_arc(curve: LevelCurve) -> bool:
    """True iff the polyline is open and free of self-intersections."""
    if curve.closed:
        return False
    pts = []
    for p in curve.points:
        if not pts or (p.x, p.y) != pts[-1]:
            pts.append((p.x, p.y))
    if len(pts) < 3:
        return True
    return bool(LineString(pts).is_simple)


def circle_fit_curvature(curve: LevelCurve, k: int = 5) -> float:
    """Curvature magnitude at the origin from a circle fit.

    Fits x^2 + y^2 + D*x + E*y + F = 0 through the k traced points nearest
    the origin; an independent geometric cross-check of the jet pipeline.
    """
    coords = curve.coords()
    if len(coords) < k:
        raise ValueError(f"need at least {k} traced points")
    r2 = (coords ** 2).sum(axis=1)
    idx = np.argsort(r2)[:k]
    x, y = coords[idx, 0], coords[idx, 1]
    A = np.column_stack([x, y, np.ones(k)])
    rhs = -(x * x + y * y)
    (D, E, F), *_ = np.linalg.lstsq(A, rhs, rcond=None)
    radius_sq = 0.25 * (D * D + E * E) - F
    if radius_sq <= 0.0:
        raise ValueError("degenerate circle fit")
    return 1.0 / math.sqrt(radius_sq)


def _sign_change_roots(grid: DensityGrid) -> list[float]:
    """Angles of sign changes of the density, by linear interpolation."""
    vals = grid.values
    t = grid.angles()
    n = grid.n
    roots = []
    for i in range(n):
        j = (i + 1) % n
        vi, vj = vals[i], vals[j]
        if vi == 0.0:
            continue
        if vi * vj < 0.0:
            lam = vi / (vi - vj)
            roots.append(float(t[i] + lam * grid.spacing))
        elif vj == 0.0:
            # walk through a zero run; count one change if the sign flips
            kk = j
            while vals[kk] == 0.0:
                kk = (kk + 1) % n
                if kk == i:
                    break
            if vals[kk] * vi < 0.0:
                roots.append(float(t[j]))
    return roots


def cone_containment(density: DensityGrid) -> bool:
    """Moment-in-cone check for a zero-mean two-sign-change density.

    The density must be positive at angle 0 with its two sign changes at
    a < 0 < b; returns True iff the first trigonometric moment lies in
    the closed cone of directions sweeping from angle a to angle b
    through the positivity arc.
    """
    mass = density.mass()
    if abs(mass) > 1e-8:
        raise LevelSetStructureError(f"density mean {mass:.3e} not zero")
    roots = _sign_change_roots(density)
    if len(roots) != 2:
        raise LevelSetStructureError(
            f"expected exactly 2 sign changes, found {len(roots)}"
        )
    at_zero = float(np.interp(0.0, density.angles(), density.values,
                              period=TAU))
    if at_zero <= 0.0:
        raise LevelSetStructureError("density not positive at angle 0")
    a = max(r for r in roots if r < 0.0) if any(r < 0.0 for r in roots) else None
    b = min(r for r in roots if r > 0.0) if any(r > 0.0 for r in roots) else None
    if a is None or b is None:
        raise LevelSetStructureError(
            f"sign changes {roots} do not bracket angle 0"
        )
    t = density.angles()
    h = density.spacing
    mx = float(np.dot(density.values, np.cos(t)) * h)
    my = float(np.dot(density.values, np.sin(t)) * h)
    theta = math.atan2(my, mx)
    width = (b - a) % TAU
    alpha = (theta - a) % TAU
    return alpha <= width + 1e-12 or alpha >= TAU - 1e-12
