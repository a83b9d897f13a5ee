"""Random sampling, the curvature-bound falsifier, sweeps, and the CLI.

The falsifier draws random measures of the reduced form (one positive
atom at angle 0 balancing a nonpositive density), computes the origin
curvature by both independent methods, audits the level curve through
the origin, and alarms if any sample with a simple-arc level curve
exceeds curvature magnitude 8.  The alarm has never fired; the exit code
contract (0 ok, 2 counterexample, 3 input error) keeps it scriptable.

Subcommands: eval, curvature, transport, trace, rearrange, extremizer,
falsify, sweep.  File formats are owned by the respective modules; the
optional environment variable LEVELSET_LAB_THREADS caps falsifier
parallelism (default: sequential).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from .boundary_measure import (
    Atom,
    BoundaryMeasure,
    DensityGrid,
    TAU,
    load_measure,
    make_measure,
    measure_from_dict,
    measure_to_dict,
    save_measure,
    total_mass,
    wrap_angle,
)
from .curvature import (
    DegenerateGradientError,
    SupdefConvergenceError,
    curvature_at_origin,
)
from .extremizer import run_extremizer_checks
from .levelset import TraceError, TraceOptions, is_simple_arc, trace_zero_set
from .poisson_eval import MeasureEvaluator, Point, origin_jet_closed
from .rearrangement import run_eps_rearrangement, run_rearrangement, trace_to_rows
from .transport_maps import (
    TransportParams,
    eps_transport_measure,
    transport_measure,
)

KAPPA_BOUND = 8.0
FALSIFY_SLACK = 1e-6


class CounterexampleError(RuntimeError):
    """An included sample exceeded the curvature bound (the alarm)."""

    def __init__(self, kappa: float, index: int, measure: BoundaryMeasure):
        super().__init__(
            f"|kappa| = {kappa!r} > {KAPPA_BOUND} at sample {index}"
        )
        self.kappa = kappa
        self.index = index
        self.measure_dict = measure_to_dict(measure)


@dataclass(frozen=True)
class FClassSpec:
    """One reduced-form sample: interval, nonpositive density, balancing atom."""

    a: float
    b: float
    density: DensityGrid
    atom_weight: float

    def to_measure(self) -> BoundaryMeasure:
        return make_measure([(0.0, self.atom_weight)], self.density)


@dataclass(frozen=True)
class FalsifyReport:
    samples: int
    max_kappa: float
    argmax: dict
    excluded: int
    seed: int

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _raised_cosine(t: np.ndarray, center: float, width: float) -> np.ndarray:
    z = np.abs((t - center + math.pi) % TAU - math.pi) / width
    return np.where(z < 1.0, 0.5 * (1.0 + np.cos(np.pi * np.minimum(z, 1.0))),
                    0.0)


def sample_f_class(seed: int, n: int = 128) -> FClassSpec:
    """Deterministic random reduced-form sample on an n-point grid.

    The vanishing interval [a, b] straddles 0; the density is a mixture
    of 1 to 4 raised-cosine bumps supported outside it, negated; the atom
    at angle 0 balances the mass exactly (discrete quadrature).
    """
    if n < 64:
        raise ValueError(f"grid size {n} < 64")
    rng = np.random.default_rng(seed)
    a = -rng.uniform(0.05, math.pi - 0.1)
    b = rng.uniform(0.05, math.pi - 0.1)
    gap = TAU - (b - a)  # complement arc length, from b around to a
    t = -math.pi + (TAU / n) * np.arange(n)
    vals = np.zeros(n)
    for _ in range(int(rng.integers(1, 5))):
        off = rng.uniform(0.02 * gap, 0.98 * gap)
        max_w = min(off, gap - off)
        width = rng.uniform(0.15, 1.0) * max_w
        if width < 1e-3:
            width = 1e-3
        amp = rng.uniform(0.2, 1.0)
        vals -= amp * _raised_cosine(t, b + off, width)
    np.minimum(vals, 0.0, out=vals)
    # clamp the vanishing interval exactly
    inside = ((t - a) % TAU) <= (b - a)
    vals[inside] = 0.0
    grid = DensityGrid(n, vals)
    return FClassSpec(a=a, b=b, density=grid, atom_weight=-grid.mass())


def sample_claim2_measure(seed: int, n: int = 256,
                          degree: int = 4) -> BoundaryMeasure:
    """Even trig-polynomial density with one positivity interval around 0.

    Cosine-only coefficients keep the sample even (mirror pairing drains
    exactly) and mean-free on the grid; rejection conditions on exactly
    two sign changes with a positive bump at 0.
    """
    rng = np.random.default_rng(seed)
    t = -math.pi + (TAU / n) * np.arange(n)
    for _ in range(1000):
        coeff = rng.normal(size=degree) / np.arange(1, degree + 1)
        vals = sum(c * np.cos((k + 1) * t) for k, c in enumerate(coeff))
        if vals[n // 2] <= 0.0:
            vals = -vals
        sign = np.sign(vals)
        nz = sign[sign != 0.0]
        changes = int(np.sum(nz[1:] != nz[:-1])) + int(nz[0] != nz[-1])
        if changes == 2 and vals[n // 2] > 0.0:
            return make_measure([], DensityGrid(n, vals))
    raise RuntimeError("rejection sampling failed to find a two-sign-change density")


def sample_two_sign_change_density(seed: int, n: int = 512,
                                   degree: int = 4) -> DensityGrid:
    """Random trig polynomial with exactly two sign changes, positive at 0.

    General (not even) coefficients; the polynomial is evaluated with its
    positivity midpoint rotated to angle 0, which keeps the grid mean at
    zero exactly up to round-off.
    """
    rng = np.random.default_rng(seed)
    fine = 1 << 12
    tf = -math.pi + (TAU / fine) * np.arange(fine)
    t = -math.pi + (TAU / n) * np.arange(n)
    ks = np.arange(1, degree + 1)
    for _ in range(1000):
        ca = rng.normal(size=degree) / ks
        cb = rng.normal(size=degree) / ks

        def poly(x):
            return sum(ca[k - 1] * np.cos(k * x) + cb[k - 1] * np.sin(k * x)
                       for k in ks)

        vf = poly(tf)
        sign = np.sign(vf)
        nz = sign[sign != 0.0]
        changes = int(np.sum(nz[1:] != nz[:-1])) + int(nz[0] != nz[-1])
        if changes != 2:
            continue
        roots = []
        for i in range(fine):
            j = (i + 1) % fine
            if vf[i] != 0.0 and vf[i] * vf[j] < 0.0:
                lam = vf[i] / (vf[i] - vf[j])
                roots.append(tf[i] + lam * (TAU / fine))
        if len(roots) != 2:
            continue
        r0, r1 = sorted(roots)
        mid_in = 0.5 * (r0 + r1)
        mid_out = wrap_angle(mid_in + math.pi)
        center = mid_in if poly(np.array([mid_in]))[0] > 0.0 else mid_out
        vals = poly(t + center)
        if vals[n // 2] > 0.0:
            return DensityGrid(n, vals)
    raise RuntimeError("rejection sampling failed to find a two-sign-change density")


def _falsify_one(seed: int, index: int, n: int) -> dict:
    child = int(np.random.SeedSequence((seed, index)).generate_state(1)[0])
    spec = sample_f_class(child, n)
    m = spec.to_measure()
    out = {
        "index": index,
        "a": spec.a,
        "b": spec.b,
        "atom_weight": spec.atom_weight,
        "included": False,
        "kappa": 0.0,
    }
    try:
        rep_h = curvature_at_origin(m, "hessian")
        rep_s = curvature_at_origin(m, "supdef")
    except (DegenerateGradientError, SupdefConvergenceError):
        return out
    kappa = max(abs(rep_h.kappa_signed), abs(rep_s.kappa_signed))
    out["kappa"] = kappa
    try:
        curve = trace_zero_set(MeasureEvaluator(m))
        simple = is_simple_arc(curve) and not (curve.saddle or curve.capped)
    except (TraceError, DegenerateGradientError):
        simple = False
    out["included"] = bool(simple)
    return out


def falsify_batch(count: int, seed: int, n: int = 128,
                  threads: int | None = None) -> FalsifyReport:
    """Run the falsifier; raises :class:`CounterexampleError` on an alarm.

    Samples whose traced level curve is not a simple open arc are
    excluded from the maximum (the bound's hypothesis fails for them) and
    counted.  Per-sample seeds derive from (seed, index), so reports are
    reproducible regardless of parallelism.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    if threads is None:
        threads = int(os.environ.get("LEVELSET_LAB_THREADS", "1"))
    results: list[dict]
    if threads > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_falsify_one, [seed] * count,
                                    range(count), [n] * count,
                                    chunksize=max(1, count // (8 * threads))))
    else:
        results = [_falsify_one(seed, i, n) for i in range(count)]
    results.sort(key=lambda r: r["index"])
    excluded = sum(1 for r in results if not r["included"])
    max_kappa = 0.0
    argmax: dict = {}
    for r in results:
        if r["included"] and r["kappa"] > max_kappa:
            max_kappa = r["kappa"]
            argmax = {k: r[k] for k in ("index", "a", "b", "atom_weight")}
    if max_kappa > KAPPA_BOUND + FALSIFY_SLACK:
        child = int(np.random.SeedSequence(
            (seed, argmax["index"])).generate_state(1)[0])
        bad = sample_f_class(child, n).to_measure()
        raise CounterexampleError(max_kappa, argmax["index"], bad)
    return FalsifyReport(samples=count, max_kappa=max_kappa, argmax=argmax,
                         excluded=excluded, seed=seed)


def sweep_symmetric(a_values) -> list[tuple[float, float, float, float]]:
    """Rows (a, 4*(1+cos a), numeric curvature, difference) for -a..a maps."""
    rows = []
    for a in a_values:
        if not (0.0 < a < math.pi):
            raise ValueError(f"sweep angle {a} outside (0, pi)")
        closed = 4.0 * (1.0 + math.cos(a))
        numeric = curvature_at_origin(
            transport_measure(TransportParams(-a, a)), "hessian"
        ).kappa_signed
        rows.append((float(a), closed, numeric, numeric - closed))
    return rows


# --- CLI ------------------------------------------------------------------


def _jet_dict(j) -> dict:
    return {"u": j.u, "ux": j.ux, "uy": j.uy,
            "uxx": j.uxx, "uxy": j.uxy, "uyy": j.uyy}


def _cmd_eval(args) -> int:
    m = load_measure(args.measure)
    if args.origin:
        jet = origin_jet_closed(m)
    else:
        jet = MeasureEvaluator(m).jet(Point(args.x, args.y))
    print(json.dumps(_jet_dict(jet), sort_keys=True))
    return 0


def _cmd_curvature(args) -> int:
    m = load_measure(args.measure)
    methods = ["hessian", "supdef"] if args.method == "both" else [args.method]
    out = {}
    for method in methods:
        rep = curvature_at_origin(m, method)
        out[method] = {
            "kappa_signed": rep.kappa_signed,
            "sigma": rep.sigma,
            "grad_angle": rep.grad_angle,
        }
    print(json.dumps(out, sort_keys=True))
    return 0


def _cmd_transport(args) -> int:
    params = TransportParams(args.a, args.b, args.eps)
    m = (eps_transport_measure(params) if args.eps is not None
         else transport_measure(params))
    save_measure(m, args.out)
    print(f"wrote {args.out} (total mass {total_mass(m):g})")
    return 0


def _curve_svg(curve) -> str:
    parts = []
    for i, p in enumerate(curve.points):
        cmd = "M" if i == 0 else "L"
        parts.append(f"{cmd} {p.x:.6f} {-p.y:.6f}")
    path = " ".join(parts)
    return (
        '<svg xmlns="http://www.w3.org/2000/svg" viewBox="-1.05 -1.05 2.1 2.1" '
        'width="640" height="640">\n'
        '<circle cx="0" cy="0" r="1" fill="none" stroke="#888" '
        'stroke-width="0.005"/>\n'
        f'<path d="{path}" fill="none" stroke="#b22" stroke-width="0.008"/>\n'
        "</svg>\n"
    )


def _cmd_trace(args) -> int:
    m = load_measure(args.measure)
    opts = TraceOptions(step=args.step)
    curve = trace_zero_set(m, opts)
    if args.out.endswith(".svg"):
        with open(args.out, "w") as fh:
            fh.write(_curve_svg(curve))
    else:
        with open(args.out, "w") as fh:
            fh.write("s,x,y\n")
            for s, p in zip(curve.arc_lengths(), curve.points):
                fh.write(f"{s!r},{p.x!r},{p.y!r}\n")
    exits = curve.exit_angles
    print(json.dumps({
        "points": len(curve.points),
        "closed": curve.closed,
        "exit_angles": list(exits) if exits else None,
    }, sort_keys=True))
    return 0


def _cmd_rearrange(args) -> int:
    m = load_measure(args.measure)
    if args.eps0 is not None:
        trace = run_eps_rearrangement(m, args.eps0, args.rounds, tol=args.tol)
    else:
        trace = run_rearrangement(m, max_steps=args.steps, tol=args.tol)
    with open(args.out, "w") as fh:
        fh.write("step,sigma,kappa,off_target_mass\n")
        for row in trace_to_rows(trace):
            fh.write(",".join(repr(v) for v in row) + "\n")
    print(json.dumps({
        "steps": len(trace.steps) - 1,
        "stalled": trace.stalled,
        "final_kappa": trace.steps[-1].kappa,
        "final_off_target_mass": trace.steps[-1].off_target_mass,
    }, sort_keys=True))
    return 0


def _cmd_extremizer(args) -> int:
    report = run_extremizer_checks(check=args.check, a=args.a)
    print(json.dumps({
        "harmonicity_residual": report.harmonicity_residual,
        "origin_jet": _jet_dict(report.origin_jet),
        "kappa_magnitude": report.kappa_magnitude,
        "limit_constant": report.limit_constant,
        "limit_max_error": report.limit_max_error,
    }, sort_keys=True))
    return 0


def _cmd_falsify(args) -> int:
    try:
        report = falsify_batch(args.samples, args.seed, n=args.n)
    except CounterexampleError as exc:
        payload = {"counterexample": exc.measure_dict, "kappa": exc.kappa,
                   "index": exc.index}
        if args.report:
            with open(args.report, "w") as fh:
                json.dump(payload, fh, sort_keys=True)
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        return 2
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(report.to_dict(), fh, sort_keys=True)
            fh.write("\n")
    print(json.dumps(report.to_dict(), sort_keys=True))
    return 0


def _cmd_sweep(args) -> int:
    try:
        a0, a1, steps = args.grid.split(":")
        grid = np.linspace(float(a0), float(a1), int(steps))
    except ValueError as exc:
        raise ValueError(f"bad --grid {args.grid!r}, want a0:a1:steps") from exc
    rows = sweep_symmetric(grid)
    with open(args.out, "w") as fh:
        fh.write("a,kappa_closed,kappa_numeric,difference\n")
        for row in rows:
            fh.write(",".join(repr(v) for v in row) + "\n")
    worst = max(abs(r[3]) for r in rows)
    print(json.dumps({"rows": len(rows), "max_difference": worst},
                     sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levelset-lab",
        description="curvature laboratory for origin level sets on the disk",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="evaluate the harmonic extension jet")
    p.add_argument("--measure", required=True)
    p.add_argument("--x", type=float, default=0.0)
    p.add_argument("--y", type=float, default=0.0)
    p.add_argument("--origin", action="store_true",
                   help="use the closed-form origin jet")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("curvature", help="origin curvature report")
    p.add_argument("--measure", required=True)
    p.add_argument("--method", choices=["hessian", "supdef", "both"],
                   default="both")
    p.set_defaults(func=_cmd_curvature)

    p = sub.add_parser("transport", help="emit a transport measure")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_transport)

    p = sub.add_parser("trace", help="trace the level curve through 0")
    p.add_argument("--measure", required=True)
    p.add_argument("--out", required=True, help="curve.csv or curve.svg")
    p.add_argument("--step", type=float, default=1e-2)
    p.set_defaults(func=_cmd_trace)

    p = sub.add_parser("rearrange", help="run a rearrangement process")
    p.add_argument("--measure", required=True)
    p.add_argument("--eps0", type=float, default=None)
    p.add_argument("--rounds", type=int, default=8)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_rearrange)

    p = sub.add_parser("extremizer", help="extremizer certificate checks")
    p.add_argument("--check", choices=["all", "harmonic", "curvature", "limit"],
                   default="all")
    p.add_argument("--a", type=float, default=5e-3)
    p.set_defaults(func=_cmd_extremizer)

    p = sub.add_parser("falsify", help="randomized bound falsification")
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, default=128, help="density grid size")
    p.add_argument("--report", default=None)
    p.set_defaults(func=_cmd_falsify)

    p = sub.add_parser("sweep", help="symmetric transport curvature sweep")
    p.add_argument("--grid", required=True, help="a0:a1:steps")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
