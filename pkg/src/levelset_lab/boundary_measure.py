"""Signed measures on the boundary circle: Dirac atoms plus a sampled density.

Every construction in this package is driven by boundary data of the form

    mu = sum_i  w_i * delta(angle_i)  +  phi(t) dt

where the atoms carry all singular behavior and ``phi`` is a smooth
periodic density sampled on a uniform grid.  Angles are stored in
canonical form in ``(-pi, pi]`` and the density is integrated with the
periodic trapezoidal rule (identical to the rectangle rule on a uniform
periodic grid, and spectrally accurate for smooth integrands).

Atoms are never smeared onto the grid; downstream evaluation treats them
in closed form.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

TAU = 2.0 * math.pi


class InvalidMeasureError(ValueError):
    """Rejected measure data; ``index`` locates the offending entry."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


def wrap_angle(theta: float) -> float:
    """Canonical angle in (-pi, pi]; ties at -pi are stored as +pi."""
    a = math.remainder(theta, TAU)
    if a == -math.pi:
        a = math.pi
    return a + 0.0  # normalize -0.0


@dataclass(frozen=True)
class Atom:
    """Point mass ``weight`` at boundary angle ``angle`` (radians)."""

    angle: float
    weight: float


@dataclass(frozen=True)
class DensityGrid:
    """Density values on the uniform periodic grid t_k = -pi + 2*pi*k/n."""

    n: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if self.n < 16:
            raise InvalidMeasureError(f"grid size {self.n} < 16")
        if vals.shape != (self.n,):
            raise InvalidMeasureError(
                f"expected {self.n} density values, got shape {vals.shape}"
            )
        bad = np.flatnonzero(~np.isfinite(vals))
        if bad.size:
            raise InvalidMeasureError(
                f"non-finite density value at index {bad[0]}", index=int(bad[0])
            )
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def spacing(self) -> float:
        return TAU / self.n

    def angles(self) -> np.ndarray:
        """Node angles t_k = -pi + 2*pi*k/n."""
        return -math.pi + self.spacing * np.arange(self.n)

    def mass(self) -> float:
        """Periodic trapezoid integral of the density."""
        return float(self.values.sum() * self.spacing)


@dataclass(frozen=True)
class BoundaryMeasure:
    """Canonical signed measure: merged atoms plus an optional density.

    ``density_shift_residual`` records the sub-grid angle left over when a
    density was rotated by a non-grid-multiple angle (atoms rotate exactly).
    It is diagnostic only and does not enter any evaluation.
    """

    atoms: tuple[Atom, ...]
    density: DensityGrid | None = None
    density_shift_residual: float = 0.0

    def is_empty(self) -> bool:
        return not self.atoms and (
            self.density is None or not np.any(self.density.values)
        )


def make_measure(
    atoms: Iterable[Atom | tuple[float, float]] = (),
    density: DensityGrid | None = None,
) -> BoundaryMeasure:
    """Build a canonical measure from raw atoms and an optional density.

    Angles are wrapped to (-pi, pi], atoms at the same canonical angle are
    merged by summing weights, and zero-weight atoms are dropped.  Raises
    :class:`InvalidMeasureError` (with the offending index) for non-finite
    input.
    """
    merged: dict[float, float] = {}
    for i, raw in enumerate(atoms):
        ang, wgt = (raw.angle, raw.weight) if isinstance(raw, Atom) else raw
        ang, wgt = float(ang), float(wgt)
        if not (math.isfinite(ang) and math.isfinite(wgt)):
            raise InvalidMeasureError(f"non-finite atom at index {i}", index=i)
        a = wrap_angle(ang)
        merged[a] = merged.get(a, 0.0) + wgt
    kept = tuple(
        Atom(a, w) for a, w in sorted(merged.items()) if w != 0.0
    )
    return BoundaryMeasure(atoms=kept, density=density)


def _resample(grid: DensityGrid, n: int) -> DensityGrid:
    """Periodic linear interpolation onto an n-point grid."""
    if grid.n == n:
        return grid
    src = grid.angles()
    dst = -math.pi + (TAU / n) * np.arange(n)
    vals = np.interp(dst, src, grid.values, period=TAU)
    return DensityGrid(n, vals)


def combine(
    m1: BoundaryMeasure, m2: BoundaryMeasure, c1: float, c2: float
) -> BoundaryMeasure:
    """Linear combination c1*m1 + c2*m2 as a canonical measure.

    Densities on different grids are resampled (coarser onto finer) by
    periodic linear interpolation.  The Poisson extension of the result is
    the same linear combination of the extensions.
    """
    raw = [(a.angle, c1 * a.weight) for a in m1.atoms]
    raw += [(a.angle, c2 * a.weight) for a in m2.atoms]
    d1, d2 = m1.density, m2.density
    if d1 is not None and d2 is not None:
        n = max(d1.n, d2.n)
        density = DensityGrid(
            n, c1 * _resample(d1, n).values + c2 * _resample(d2, n).values
        )
    elif d1 is not None:
        density = DensityGrid(d1.n, c1 * d1.values)
    elif d2 is not None:
        density = DensityGrid(d2.n, c2 * d2.values)
    else:
        density = None
    return make_measure(raw, density)


def rotate_measure(m: BoundaryMeasure, theta: float) -> BoundaryMeasure:
    """Rotate the measure by ``theta`` counterclockwise.

    Atom angles shift exactly.  A density is shifted cyclically by the
    nearest whole number of grid nodes; the sub-grid remainder is recorded
    in ``density_shift_residual`` instead of being interpolated away.
    """
    atoms = make_measure([(a.angle + theta, a.weight) for a in m.atoms]).atoms
    density = m.density
    residual = m.density_shift_residual
    if density is not None:
        k = int(round(wrap_angle(theta) / density.spacing))
        density = DensityGrid(density.n, np.roll(density.values, k))
        residual = wrap_angle(residual + theta - k * density.spacing)
    return BoundaryMeasure(atoms=atoms, density=density,
                           density_shift_residual=residual)


def total_mass(m: BoundaryMeasure) -> float:
    """Total signed mass: atom weights plus the density integral.

    Equals 2*pi times the harmonic extension evaluated at the origin.
    """
    s = math.fsum(a.weight for a in m.atoms)
    if m.density is not None:
        s += m.density.mass()
    return s


def moment_vector(m: BoundaryMeasure) -> tuple[float, float]:
    """First trigonometric moment (integral of cos t, sin t against mu).

    Equals pi times the gradient of the harmonic extension at the origin.
    """
    mx = math.fsum(a.weight * math.cos(a.angle) for a in m.atoms)
    my = math.fsum(a.weight * math.sin(a.angle) for a in m.atoms)
    if m.density is not None:
        t = m.density.angles()
        h = m.density.spacing
        mx += float(np.dot(m.density.values, np.cos(t)) * h)
        my += float(np.dot(m.density.values, np.sin(t)) * h)
    return (mx, my)


def second_moments(m: BoundaryMeasure) -> tuple[float, float]:
    """Second trigonometric moments (integral of cos 2t, sin 2t against mu)."""
    c2 = math.fsum(a.weight * math.cos(2 * a.angle) for a in m.atoms)
    s2 = math.fsum(a.weight * math.sin(2 * a.angle) for a in m.atoms)
    if m.density is not None:
        t = m.density.angles()
        h = m.density.spacing
        c2 += float(np.dot(m.density.values, np.cos(2 * t)) * h)
        s2 += float(np.dot(m.density.values, np.sin(2 * t)) * h)
    return (c2, s2)


def measure_scale(m: BoundaryMeasure) -> float:
    """Total variation proxy used for relative tolerances."""
    s = math.fsum(abs(a.weight) for a in m.atoms)
    if m.density is not None:
        s += float(np.abs(m.density.values).sum() * m.density.spacing)
    return s


# --- JSON wire format -----------------------------------------------------
#
# {"atoms": [{"angle": <real>, "weight": <real>}, ...],
#  "density": {"n": <int>, "values": [<real>, ...]}}      (density optional)


def measure_to_dict(m: BoundaryMeasure) -> dict:
    out: dict = {
        "atoms": [{"angle": a.angle, "weight": a.weight} for a in m.atoms]
    }
    if m.density is not None:
        out["density"] = {
            "n": m.density.n,
            "values": [float(v) for v in m.density.values],
        }
    return out


def measure_from_dict(data: dict) -> BoundaryMeasure:
    atoms = [(a["angle"], a["weight"]) for a in data.get("atoms", [])]
    density = None
    if data.get("density") is not None:
        density = DensityGrid(
            int(data["density"]["n"]),
            np.asarray(data["density"]["values"], dtype=float),
        )
    return make_measure(atoms, density)


def save_measure(m: BoundaryMeasure, path) -> None:
    with open(path, "w") as fh:
        json.dump(measure_to_dict(m), fh, sort_keys=True)
        fh.write("\n")


def load_measure(path) -> BoundaryMeasure:
    with open(path) as fh:
        return measure_from_dict(json.load(fh))
