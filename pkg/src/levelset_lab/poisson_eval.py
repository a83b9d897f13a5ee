"""Harmonic extension of boundary measures and its first two derivatives.

The extension of a unit point mass at boundary angle t is the kernel

    K(x, y; t) = (1 - x^2 - y^2) / (2*pi*((x - cos t)^2 + (y - sin t)^2)),

and a measure extends by superposition: atoms are summed in closed form,
a density is integrated node by node with the grid quadrature applied to
the analytic kernel jet (so every jet is exactly harmonic and the
quadrature keeps its spectral accuracy).

At the origin everything collapses to trigonometric moments:

    u(0,0)   = mass / (2*pi)
    grad u   = (moment_x, moment_y) / pi
    u_xx     = (2/pi) * integral of cos 2t,   u_yy = -u_xx
    u_xy     = (2/pi) * integral of sin 2t
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .boundary_measure import (
    BoundaryMeasure,
    moment_vector,
    second_moments,
    total_mass,
)

TAU = 2.0 * math.pi

#: evaluation is rejected within this distance of an atom location
ATOM_GUARD = 1e-6


class EvaluationGuardError(RuntimeError):
    """Evaluation attempted inside the guard band of a boundary singularity."""

    def __init__(self, distance: float, location: tuple[float, float]):
        super().__init__(
            f"evaluation {distance:.3e} from singular boundary point {location}"
        )
        self.distance = distance
        self.location = location


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def radius(self) -> float:
        return math.hypot(self.x, self.y)


@dataclass(frozen=True)
class Jet2:
    """Value, gradient and Hessian of a harmonic function at a point."""

    u: float
    ux: float
    uy: float
    uxx: float
    uxy: float
    uyy: float

    def grad_norm(self) -> float:
        return math.hypot(self.ux, self.uy)

    def grad_angle(self) -> float:
        return math.atan2(self.uy, self.ux)

    def scaled(self, c: float) -> "Jet2":
        return Jet2(c * self.u, c * self.ux, c * self.uy,
                    c * self.uxx, c * self.uxy, c * self.uyy)

    def __add__(self, other: "Jet2") -> "Jet2":
        return Jet2(self.u + other.u, self.ux + other.ux, self.uy + other.uy,
                    self.uxx + other.uxx, self.uxy + other.uxy,
                    self.uyy + other.uyy)

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return (self.u, self.ux, self.uy, self.uxx, self.uxy, self.uyy)


ZERO_JET = Jet2(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def _check_interior(x: float, y: float) -> None:
    if x * x + y * y >= 1.0:
        raise ValueError(f"point ({x}, {y}) is not in the open unit disk")


def kernel_jet(p: Point, t: float, guard: float = ATOM_GUARD) -> Jet2:
    """Kernel value and derivatives in (x, y) at ``p`` for boundary angle ``t``.

    Raises :class:`EvaluationGuardError` when ``p`` is within ``guard`` of
    the singular boundary point (cos t, sin t); pass ``guard=0`` to override.
    """
    x, y = p.x, p.y
    _check_interior(x, y)
    c, s = math.cos(t), math.sin(t)
    dx, dy = x - c, y - s
    D = dx * dx + dy * dy
    if D < guard * guard:
        raise EvaluationGuardError(math.sqrt(D), (c, s))
    N = 1.0 - x * x - y * y
    f = N / D
    # quotient rule against D*f = N with N_x = -2x, D_x = 2*dx, D_xx = 2
    fx = (-2.0 * x - 2.0 * f * dx) / D
    fy = (-2.0 * y - 2.0 * f * dy) / D
    fxx = (-2.0 - 4.0 * fx * dx - 2.0 * f) / D
    fyy = (-2.0 - 4.0 * fy * dy - 2.0 * f) / D
    fxy = (-2.0 * fx * dy - 2.0 * fy * dx) / D
    k = 1.0 / TAU
    return Jet2(k * f, k * fx, k * fy, k * fxx, k * fxy, k * fyy)


class MeasureEvaluator:
    """Precomputed evaluator for the harmonic extension of one measure.

    Atoms and density nodes share the same kernel, so they are fused into
    one weighted point set: node k of a density grid contributes weight
    values[k] * (2*pi/n), which makes the nodewise quadrature literally a
    sum of point masses.  The guard band applies to atom locations only
    (density nodes are kept harmless by the tracer's stop radius).
    """

    def __init__(self, m: BoundaryMeasure, guard: float = ATOM_GUARD):
        self.measure = m
        self.guard = guard
        ang = [a.angle for a in m.atoms]
        wgt = [a.weight for a in m.atoms]
        self._n_atoms = len(ang)
        if m.density is not None:
            t = m.density.angles()
            ang = np.concatenate([ang, t])
            wgt = np.concatenate([wgt, m.density.values * m.density.spacing])
        self._cos = np.cos(np.asarray(ang, dtype=float))
        self._sin = np.sin(np.asarray(ang, dtype=float))
        self._w = np.asarray(wgt, dtype=float)
        self._origin_jet: Jet2 | None = None

    def _distances(self, x: float, y: float) -> np.ndarray:
        dx = x - self._cos
        dy = y - self._sin
        return dx, dy, dx * dx + dy * dy

    def _guard_check(self, D: np.ndarray) -> None:
        if self._n_atoms and self.guard > 0.0:
            i = int(np.argmin(D[: self._n_atoms]))
            if D[i] < self.guard * self.guard:
                raise EvaluationGuardError(
                    math.sqrt(D[i]), (float(self._cos[i]), float(self._sin[i]))
                )

    def value(self, p: Point) -> float:
        x, y = p.x, p.y
        _check_interior(x, y)
        dx, dy, D = self._distances(x, y)
        self._guard_check(D)
        N = 1.0 - x * x - y * y
        return float(self._w @ (N / D)) / TAU

    def value_and_grad(self, p: Point) -> tuple[float, float, float]:
        x, y = p.x, p.y
        _check_interior(x, y)
        dx, dy, D = self._distances(x, y)
        self._guard_check(D)
        N = 1.0 - x * x - y * y
        invD = 1.0 / D
        f = N * invD
        fx = (-2.0 * x - 2.0 * f * dx) * invD
        fy = (-2.0 * y - 2.0 * f * dy) * invD
        w = self._w
        return (float(w @ f) / TAU, float(w @ fx) / TAU, float(w @ fy) / TAU)

    def jet(self, p: Point) -> Jet2:
        x, y = p.x, p.y
        _check_interior(x, y)
        dx, dy, D = self._distances(x, y)
        self._guard_check(D)
        N = 1.0 - x * x - y * y
        invD = 1.0 / D
        f = N * invD
        fx = (-2.0 * x - 2.0 * f * dx) * invD
        fy = (-2.0 * y - 2.0 * f * dy) * invD
        fxx = (-2.0 - 4.0 * fx * dx - 2.0 * f) * invD
        fyy = (-2.0 - 4.0 * fy * dy - 2.0 * f) * invD
        fxy = (-2.0 * fx * dy - 2.0 * fy * dx) * invD
        w = self._w
        vals = (w @ f, w @ fx, w @ fy, w @ fxx, w @ fxy, w @ fyy)
        if not np.all(np.isfinite(vals)):
            raise ArithmeticError("non-finite accumulation in jet evaluation")
        return Jet2(*(float(v) / TAU for v in vals))

    def origin_jet(self) -> Jet2:
        if self._origin_jet is None:
            self._origin_jet = origin_jet_closed(self.measure)
        return self._origin_jet


def evaluate_jet(m: BoundaryMeasure, p: Point,
                 guard: float = ATOM_GUARD) -> Jet2:
    """Jet of the harmonic extension of ``m`` at interior point ``p``."""
    return MeasureEvaluator(m, guard=guard).jet(p)


def origin_jet_closed(m: BoundaryMeasure) -> Jet2:
    """Exact origin jet from trigonometric moments (quadrature for density)."""
    u = total_mass(m) / TAU
    mx, my = moment_vector(m)
    c2, s2 = second_moments(m)
    return Jet2(u, mx / math.pi, my / math.pi,
                2.0 * c2 / math.pi, 2.0 * s2 / math.pi, -2.0 * c2 / math.pi)


class RotatedSource:
    """View of a jet source rotated counterclockwise by ``theta``."""

    def __init__(self, source, theta: float):
        self.source = source
        self.theta = theta
        self._c = math.cos(theta)
        self._s = math.sin(theta)

    def _pull_back(self, p: Point) -> Point:
        c, s = self._c, self._s
        return Point(c * p.x + s * p.y, -s * p.x + c * p.y)

    def _push_jet(self, j: Jet2) -> Jet2:
        c, s = self._c, self._s
        gx = c * j.ux - s * j.uy
        gy = s * j.ux + c * j.uy
        # H' = R H R^T
        hxx = c * c * j.uxx - 2 * c * s * j.uxy + s * s * j.uyy
        hyy = s * s * j.uxx + 2 * c * s * j.uxy + c * c * j.uyy
        hxy = c * s * (j.uxx - j.uyy) + (c * c - s * s) * j.uxy
        return Jet2(j.u, gx, gy, hxx, hxy, hyy)

    def value(self, p: Point) -> float:
        q = self._pull_back(p)
        src = self.source
        if hasattr(src, "value"):
            return src.value(q)
        return src.jet(q).u

    def jet(self, p: Point) -> Jet2:
        return self._push_jet(self.source.jet(self._pull_back(p)))

    def origin_jet(self) -> Jet2:
        return self._push_jet(_origin_jet_of(self.source))


def as_jet_source(obj):
    """Accept either a BoundaryMeasure or anything exposing ``.jet(Point)``."""
    if isinstance(obj, BoundaryMeasure):
        return MeasureEvaluator(obj)
    if hasattr(obj, "jet"):
        return obj
    raise TypeError(f"cannot evaluate jets of {type(obj).__name__}")


def _origin_jet_of(source) -> Jet2:
    fn = getattr(source, "origin_jet", None)
    if fn is not None:
        return fn()
    return source.jet(Point(0.0, 0.0))
