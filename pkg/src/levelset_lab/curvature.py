"""Signed curvature of the level curve through the origin, two ways.

The level curve {u = u(0,0)} passes transversally through the origin
whenever the gradient there is nonzero, and its signed curvature is

    kappa = -(uy^2*uxx - 2*ux*uy*uxy + ux^2*uyy) / (ux^2 + uy^2)^(3/2).

The sign is fixed so that the explicit transport measures of
:mod:`levelset_lab.transport_maps` come out with positive curvature
2*(1 + cos a + cos b + cos(a+b)); after rotating the gradient onto the
positive x axis the formula reduces to -uyy/sigma.

The second, independent route ("supdef") characterizes the same number as

    kappa = 2*sup{ a : lim_{y->0} (u(a*y^2, y) - u(0,0)) / y^2 <= 0 },

estimated by sampling shrinking parabolic probes with Richardson
extrapolation.  The probe limit q_a is affine in a, so two probes locate
the sup exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .boundary_measure import BoundaryMeasure, measure_scale
from .poisson_eval import (
    Jet2,
    Point,
    RotatedSource,
    _origin_jet_of,
    as_jet_source,
)

#: probe schedule for the sup-based estimate
SUPDEF_Y0 = 1e-2
SUPDEF_HALVINGS = 8

DEGENERATE_GRADIENT_FLOOR = 1e-12


class DegenerateGradientError(ValueError):
    """Gradient at the origin too small for a meaningful curvature."""


class SupdefConvergenceError(RuntimeError):
    """Richardson extrapolation of the parabolic probes did not settle."""

    def __init__(self, residual: float, tolerance: float):
        super().__init__(
            f"probe extrapolation residual {residual:.3e} above {tolerance:.3e}"
        )
        self.residual = residual
        self.tolerance = tolerance


@dataclass(frozen=True)
class CurvatureReport:
    kappa_signed: float
    sigma: float
    method: str
    grad_angle: float


def signed_curvature(jet: Jet2) -> float:
    """Signed curvature of the level curve from one jet; rotation invariant."""
    g2 = jet.ux * jet.ux + jet.uy * jet.uy
    if g2 == 0.0:
        raise DegenerateGradientError("zero gradient in curvature formula")
    num = (jet.uy * jet.uy * jet.uxx
           - 2.0 * jet.ux * jet.uy * jet.uxy
           + jet.ux * jet.ux * jet.uyy)
    return -num / g2 ** 1.5


def _gradient_floor(obj) -> float:
    if isinstance(obj, BoundaryMeasure):
        return DEGENERATE_GRADIENT_FLOOR * max(measure_scale(obj), 1e-300)
    return DEGENERATE_GRADIENT_FLOOR


def richardson_limit(values, step_ratio: float = 2.0) -> tuple[float, float]:
    """Limit of a sequence sampled at steps h0, h0/r, h0/r^2, ...

    Assumes an error expansion in integer powers of the step.  Returns the
    extrapolated limit and the magnitude of the last diagonal correction,
    which serves as the convergence residual.
    """
    level = list(values)
    diag = [level[0]]
    for m in range(1, len(values)):
        mult = step_ratio ** m
        level = [
            (mult * level[i + 1] - level[i]) / (mult - 1.0)
            for i in range(len(level) - 1)
        ]
        diag.append(level[-1])
    residual = abs(diag[-1] - diag[-2]) if len(diag) > 1 else math.inf
    return diag[-1], residual


def sup_curvature_estimate(obj) -> float:
    """Curvature via the parabolic probe sup, after aligning the gradient.

    The source is rotated so the origin gradient points along +x, then
    q_a = lim (u(a*y^2, y) - u0)/y^2 is extrapolated for a in {0, 1} and
    the affine root gives kappa = 2*a*.
    """
    source = as_jet_source(obj)
    jet0 = _origin_jet_of(source)
    sigma = jet0.grad_norm()
    if sigma < _gradient_floor(obj):
        raise DegenerateGradientError(
            f"gradient norm {sigma:.3e} below degeneracy floor"
        )
    aligned = RotatedSource(source, -jet0.grad_angle())
    u0 = _origin_jet_of(aligned).u

    ys = [SUPDEF_Y0 * 0.5 ** k for k in range(SUPDEF_HALVINGS + 1)]

    def probe(a: float) -> float:
        vals = [(aligned.value(Point(a * y * y, y)) - u0) / (y * y) for y in ys]
        q, residual = richardson_limit(vals)
        tol = 1e-6 * sigma
        if residual > tol:
            raise SupdefConvergenceError(residual, tol)
        return q

    q0 = probe(0.0)
    q1 = probe(1.0)
    a_star = -q0 / (q1 - q0)
    return 2.0 * a_star


def curvature_at_origin(obj, method: str = "hessian") -> CurvatureReport:
    """Curvature report for the level curve through the origin.

    ``method`` selects the closed-form Hessian route or the independent
    sup-based probe route; both populate sigma and the gradient direction.
    """
    source = as_jet_source(obj)
    jet0 = _origin_jet_of(source)
    sigma = jet0.grad_norm()
    if sigma < _gradient_floor(obj):
        raise DegenerateGradientError(
            f"gradient norm {sigma:.3e} below degeneracy floor"
        )
    if method == "hessian":
        kappa = signed_curvature(jet0)
    elif method == "supdef":
        kappa = sup_curvature_estimate(obj)
    else:
        raise ValueError(f"unknown curvature method {method!r}")
    return CurvatureReport(kappa_signed=kappa, sigma=sigma, method=method,
                           grad_angle=jet0.grad_angle())


class DilatedSource:
    """Evaluator of u(r*x, r*y) built from the jets of u by the chain rule."""

    def __init__(self, source, r: float):
        if not 0.0 < r <= 1.0:
            raise ValueError(f"dilation factor {r} outside (0, 1]")
        self.source = source
        self.r = r

    def _chain(self, j: Jet2) -> Jet2:
        r = self.r
        return Jet2(j.u, r * j.ux, r * j.uy,
                    r * r * j.uxx, r * r * j.uxy, r * r * j.uyy)

    def value(self, p: Point) -> float:
        q = Point(self.r * p.x, self.r * p.y)
        src = self.source
        if hasattr(src, "value"):
            return src.value(q)
        return src.jet(q).u

    def jet(self, p: Point) -> Jet2:
        return self._chain(self.source.jet(Point(self.r * p.x, self.r * p.y)))

    def origin_jet(self) -> Jet2:
        return self._chain(_origin_jet_of(self.source))


def dilate(obj, r: float) -> DilatedSource:
    """Evaluator for the dilated function; curvature scales linearly in r."""
    return DilatedSource(as_jet_source(obj), r)
