"""The sharp-curvature extremizer and its closed-form jet.

The rational harmonic function

    w(x, y) = (x^2 + y^2 - 1)*(x - 2x^2 + x^3 - 4y^2 + x*y^2)
              / (1 - 2x + x^2 + y^2)^3

is finite on the closed disk except for a triple singularity at (1, 0),
vanishes at the origin with jet (u, ux, uy, uxx, uxy, uyy) =
(0, -1, 0, -8, 0, 8), and its level curve through the origin has
curvature of magnitude exactly 8, the sharp bound.  Its zero curve near
the origin is the algebraic curve  x*(1-x)^2 = y^2*(4-x).

The same function arises, up to the constant -1/(2*pi), as the limit of
the symmetric transport extensions g_{-a,a}/a^2 as a -> 0; see
:func:`limit_ratio_check`.

All partial derivatives below were derived once from the quotient rule
and are frozen as code; the test suite validates them against central
finite differences of :func:`w_eval`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .poisson_eval import EvaluationGuardError, Jet2, MeasureEvaluator, Point
from .transport_maps import TransportParams, transport_measure

TAU = 2.0 * math.pi

#: rejection radius around the boundary singularity (1, 0)
SINGULARITY_GUARD = 1e-9


@dataclass(frozen=True)
class ExtremizerCheckReport:
    harmonicity_residual: float
    origin_jet: Jet2
    kappa_magnitude: float
    limit_constant: float
    limit_max_error: float


def _guard(x: float, y: float) -> None:
    d2 = (x - 1.0) * (x - 1.0) + y * y
    if d2 < SINGULARITY_GUARD * SINGULARITY_GUARD:
        raise EvaluationGuardError(math.sqrt(d2), (1.0, 0.0))


def w_eval(p: Point) -> float:
    """Value of the extremizer; rejects points within 1e-9 of (1, 0)."""
    x, y = p.x, p.y
    _guard(x, y)
    g = x - 2.0 * x * x + x ** 3 - 4.0 * y * y + x * y * y
    N = (x * x + y * y - 1.0) * g
    D = 1.0 - 2.0 * x + x * x + y * y
    return N / D ** 3


def w_jet(p: Point) -> Jet2:
    """Value, gradient and Hessian of the extremizer in closed form."""
    x, y = p.x, p.y
    _guard(x, y)
    r2m1 = x * x + y * y - 1.0
    g = x - 2.0 * x * x + x ** 3 - 4.0 * y * y + x * y * y
    gx = 1.0 - 4.0 * x + 3.0 * x * x + y * y
    gy = -8.0 * y + 2.0 * x * y
    N = r2m1 * g
    Nx = 2.0 * x * g + r2m1 * gx
    Ny = 2.0 * y * g + r2m1 * gy
    Nxx = 2.0 * g + 4.0 * x * gx + r2m1 * (6.0 * x - 4.0)
    Nxy = 2.0 * y * gx + 2.0 * x * gy + r2m1 * (2.0 * y)
    Nyy = 2.0 * g + 4.0 * y * gy + r2m1 * (2.0 * x - 8.0)
    D = 1.0 - 2.0 * x + x * x + y * y
    Dx = 2.0 * x - 2.0
    Dy = 2.0 * y
    i3 = 1.0 / D ** 3
    i4 = i3 / D
    i5 = i4 / D
    u = N * i3
    ux = Nx * i3 - 3.0 * N * Dx * i4
    uy = Ny * i3 - 3.0 * N * Dy * i4
    uxx = Nxx * i3 - 6.0 * Nx * Dx * i4 + 12.0 * N * Dx * Dx * i5 - 6.0 * N * i4
    uyy = Nyy * i3 - 6.0 * Ny * Dy * i4 + 12.0 * N * Dy * Dy * i5 - 6.0 * N * i4
    uxy = Nxy * i3 - 3.0 * (Nx * Dy + Ny * Dx) * i4 + 12.0 * N * Dx * Dy * i5
    return Jet2(u, ux, uy, uxx, uxy, uyy)


def zero_curve_residual(p: Point) -> float:
    """Residual of the algebraic zero-curve equation x*(1-x)^2 = y^2*(4-x)."""
    x, y = p.x, p.y
    return x * (1.0 - x) ** 2 - y * y * (4.0 - x)


class ExtremizerSource:
    """Jet source for ``scale * w``; plugs into curvature and tracing.

    The measure-normalized extremizer, the small-angle limit of the
    symmetric transport extensions, is ``scale = -1/(2*pi)``.
    """

    def __init__(self, scale: float = 1.0):
        self.scale = scale

    def value(self, p: Point) -> float:
        return self.scale * w_eval(p)

    def jet(self, p: Point) -> Jet2:
        return w_jet(p).scaled(self.scale)

    def origin_jet(self) -> Jet2:
        return Jet2(0.0, -1.0, 0.0, -8.0, 0.0, 8.0).scaled(self.scale)


def measure_normalized_extremizer() -> ExtremizerSource:
    """The extension -w/(2*pi), whose origin gradient points along +x."""
    return ExtremizerSource(scale=-1.0 / TAU)


def default_limit_points(count: int = 50, min_gap: float = 0.35) -> list[Point]:
    """Deterministic polar grid in |p| <= 0.9, kept away from (1, 0).

    Points within ``min_gap`` of the singularity are dropped: the
    second-difference error of the ratio check is amplified there and
    would dominate the fit.
    """
    radii = [0.15, 0.35, 0.55, 0.75, 0.9]
    per_ring = max(1, 2 * count // len(radii))
    pts = []
    for i, r in enumerate(radii):
        for j in range(per_ring):
            th = math.pi * (2.0 * j + 1.0) / per_ring + 0.1 * i
            x, y = r * math.cos(th), r * math.sin(th)
            if math.hypot(x - 1.0, y) >= min_gap:
                pts.append(Point(x, y))
    return pts[:count]


def _minimax_constant(ratios, weights) -> tuple[float, float]:
    """argmin_c max_i |ratios_i - c*weights_i| by exact candidate search."""
    m = len(ratios)

    def err(c: float) -> float:
        return max(abs(ratios[i] - c * weights[i]) for i in range(m))

    candidates = []
    for i in range(m):
        if weights[i] != 0.0:
            candidates.append(ratios[i] / weights[i])
        for j in range(i + 1, m):
            dw = weights[i] - weights[j]
            sw = weights[i] + weights[j]
            if dw != 0.0:
                candidates.append((ratios[i] - ratios[j]) / dw)
            if sw != 0.0:
                candidates.append((ratios[i] + ratios[j]) / sw)
    best = min(candidates, key=err)
    return best, err(best)


def limit_ratio_check(
    a: float, sample_points: Sequence[Point] | None = None
) -> tuple[float, float]:
    """Fit G_a/a^2 against w by one constant; second-order in a.

    G_a is the harmonic extension of the symmetric transport measure with
    removal angles -a and a.  Returns the minimax constant c and the fit
    error max |G_a(p)/a^2 - c*w(p)|; c converges to -1/(2*pi) with O(a^2)
    error as a -> 0.
    """
    if not 0.0 < a <= 0.1:
        raise ValueError(f"a = {a} outside (0, 0.1]")
    pts = list(sample_points) if sample_points is not None else default_limit_points()
    ev = MeasureEvaluator(transport_measure(TransportParams(-a, a)))
    ratios = [ev.value(p) / (a * a) for p in pts]
    weights = [w_eval(p) for p in pts]
    return _minimax_constant(ratios, weights)


def _w_longdouble(x, y):
    g = x - 2 * x * x + x ** 3 - 4 * y * y + x * y * y
    N = (x * x + y * y - 1) * g
    D = 1 - 2 * x + x * x + y * y
    return N / D ** 3


def fd_laplacian_w_batch(xs, ys, h: float = 1e-4):
    """Fourth-order finite-difference Laplacian of w, in extended precision.

    Independent harmonicity oracle for the closed forms above.  Extended
    precision keeps subtractive round-off below the truncation term even
    moderately close to the boundary singularity; vectorized over points.
    """
    import numpy as np

    x = np.asarray(xs, dtype=np.longdouble)
    y = np.asarray(ys, dtype=np.longdouble)
    hh = np.longdouble(h)
    center = _w_longdouble(x, y)
    sx = (-(_w_longdouble(x + 2 * hh, y) + _w_longdouble(x - 2 * hh, y))
          + 16 * (_w_longdouble(x + hh, y) + _w_longdouble(x - hh, y))
          - 30 * center)
    sy = (-(_w_longdouble(x, y + 2 * hh) + _w_longdouble(x, y - 2 * hh))
          + 16 * (_w_longdouble(x, y + hh) + _w_longdouble(x, y - hh))
          - 30 * center)
    return ((sx + sy) / (12 * hh * hh)).astype(float)


def fd_laplacian_w(p: Point, h: float = 1e-4) -> float:
    """Scalar convenience wrapper around :func:`fd_laplacian_w_batch`."""
    _guard(p.x, p.y)
    return float(fd_laplacian_w_batch([p.x], [p.y], h)[0])


def harmonicity_sample_points(points: int = 1000, seed: int = 20240901,
                              min_gap: float = 0.12):
    """Uniform points in |p| <= 0.9 at distance >= min_gap from (1, 0).

    The exclusion zone is where no double-precision finite-difference
    stencil can resolve the Laplacian residual of a function with a
    third-order boundary singularity.
    """
    import numpy as np

    rng = np.random.default_rng(seed)
    xs: list[float] = []
    ys: list[float] = []
    while len(xs) < points:
        k = 2 * (points - len(xs))
        r = 0.9 * np.sqrt(rng.uniform(size=k))
        th = rng.uniform(0.0, TAU, size=k)
        x, y = r * np.cos(th), r * np.sin(th)
        keep = np.hypot(x - 1.0, y) >= min_gap
        xs.extend(x[keep])
        ys.extend(y[keep])
    return np.asarray(xs[:points]), np.asarray(ys[:points])


def run_extremizer_checks(
    check: str = "all",
    a: float = 5e-3,
    points: int = 1000,
    seed: int = 20240901,
) -> ExtremizerCheckReport:
    """Certificate run: harmonicity, origin jet and curvature, limit fit.

    The reported harmonicity residual is the maximum of
    |FD Laplacian| / (1 + |w|) over the sample points.
    """
    import numpy as np

    if check not in ("all", "harmonic", "curvature", "limit"):
        raise ValueError(f"unknown check {check!r}")

    harm = 0.0
    if check in ("all", "harmonic"):
        xs, ys = harmonicity_sample_points(points, seed)
        lap = fd_laplacian_w_batch(xs, ys)
        wvals = np.asarray([w_eval(Point(float(x), float(y)))
                            for x, y in zip(xs, ys)])
        harm = float(np.max(np.abs(lap) / (1.0 + np.abs(wvals))))

    jet0 = w_jet(Point(0.0, 0.0))
    from .curvature import signed_curvature

    kappa = abs(signed_curvature(jet0))

    c, err = (0.0, 0.0)
    if check in ("all", "limit"):
        c, err = limit_ratio_check(a)

    return ExtremizerCheckReport(
        harmonicity_residual=harm,
        origin_jet=jet0,
        kappa_magnitude=kappa,
        limit_constant=c,
        limit_max_error=err,
    )
