"""Explicit transport measures on the circle and their closed-form curvatures.

Given -pi < a < 0 < b < pi, the basic map removes mass at angles a and b
and deposits it at angle 0:

    mu_{a,b} = delta_0 - w_a*delta_a - w_b*delta_b,
    w_a = 1/(1 - sin a/sin b),   w_b = (-sin a/sin b)/(1 - sin a/sin b),

so w_a, w_b > 0 and w_a + w_b = 1 (mass zero, gradient along +x).  The
curvature of its zero curve at the origin is

    2*(1 + cos a + cos b + cos(a + b))  <=  8.

The eps-variant splits the deposited mass onto the two angles +-eps, and
decomposes exactly as  mu_{a,b,eps} = 2*mu_{a,b} + nu_eps  with

    nu_eps = delta_eps + delta_{-eps} - 2*delta_0,
    |kappa(nu_eps)| = 2*(1 - cos 2*eps)/(1 - cos eps) < 8  for eps > 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .boundary_measure import BoundaryMeasure, combine, make_measure


@dataclass(frozen=True)
class TransportParams:
    """Angles of one transport map; eps present only for the split variant."""

    a: float
    b: float
    eps: float | None = None

    def __post_init__(self):
        if not (-math.pi < self.a < 0.0):
            raise ValueError(f"a = {self.a} outside (-pi, 0)")
        if not (0.0 < self.b < math.pi):
            raise ValueError(f"b = {self.b} outside (0, pi)")
        if self.eps is not None:
            if not (0.0 < self.eps < min(-self.a, self.b)):
                raise ValueError(
                    f"eps = {self.eps} outside (0, min(-a, b)) "
                    f"= (0, {min(-self.a, self.b)})"
                )

    def weights(self) -> tuple[float, float]:
        """Positive removal weights (w_a, w_b), summing to one."""
        q = math.sin(self.a) / math.sin(self.b)
        w_a = 1.0 / (1.0 - q)
        return (w_a, -q * w_a)


def transport_measure(p: TransportParams) -> BoundaryMeasure:
    """Three-atom measure moving mass from angles a and b to angle 0."""
    if p.eps is not None:
        raise ValueError("eps must be absent for the basic transport map")
    w_a, w_b = p.weights()
    return make_measure([(0.0, 1.0), (p.a, -w_a), (p.b, -w_b)])


def transport_curvature_closed(p: TransportParams) -> float:
    """Curvature 2*(1 + cos a + cos b + cos(a+b)) of the basic map."""
    if p.eps is not None:
        raise ValueError("eps must be absent for the basic transport map")
    return 2.0 * (1.0 + math.cos(p.a) + math.cos(p.b) + math.cos(p.a + p.b))


def eps_transport_measure(p: TransportParams) -> BoundaryMeasure:
    """Four-atom measure splitting the deposited mass onto angles +-eps."""
    if p.eps is None:
        raise ValueError("eps is required for the split transport map")
    w_a, w_b = p.weights()
    return make_measure([
        (p.eps, 1.0),
        (-p.eps, 1.0),
        (p.a, -2.0 * w_a),
        (p.b, -2.0 * w_b),
    ])


def nu_measure(eps: float) -> BoundaryMeasure:
    """Bracket measure delta_eps + delta_{-eps} - 2*delta_0."""
    if not (0.0 < eps < math.pi):
        raise ValueError(f"eps = {eps} outside (0, pi)")
    return make_measure([(eps, 1.0), (-eps, 1.0), (0.0, -2.0)])


def h_curvature_closed(eps: float) -> float:
    """Curvature magnitude 2*(1 - cos 2*eps)/(1 - cos eps) of nu_eps.

    Strictly below 8 on (0, pi), approaching 8 only as eps -> 0.
    """
    if not (0.0 < eps < math.pi):
        raise ValueError(f"eps = {eps} outside (0, pi)")
    return 2.0 * (1.0 - math.cos(2.0 * eps)) / (1.0 - math.cos(eps))


def decompose_check(p: TransportParams) -> float:
    """Max atom-weight residual of mu_{a,b,eps} - (2*mu_{a,b} + nu_eps).

    Exactly zero by the weight algebra; returned for audit.
    """
    if p.eps is None:
        raise ValueError("eps is required for the decomposition check")
    basic = TransportParams(p.a, p.b)
    lhs = eps_transport_measure(p)
    rhs = combine(transport_measure(basic), nu_measure(p.eps), 2.0, 1.0)
    residual = combine(lhs, rhs, 1.0, -1.0)
    return max((abs(a.weight) for a in residual.atoms), default=0.0)
