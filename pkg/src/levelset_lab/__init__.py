"""Curvature laboratory for origin level sets of harmonic functions.

Boundary measures on the unit circle (atoms plus densities), their
harmonic extensions and jets, two independent curvature methods with the
sharp bound 8, explicit transport measures, the rational extremizer,
level-curve tracing, mass rearrangement, and a randomized falsifier.
"""

from .boundary_measure import (
    Atom,
    BoundaryMeasure,
    DensityGrid,
    InvalidMeasureError,
    combine,
    load_measure,
    make_measure,
    measure_from_dict,
    measure_to_dict,
    moment_vector,
    rotate_measure,
    save_measure,
    total_mass,
    wrap_angle,
)
from .curvature import (
    CurvatureReport,
    DegenerateGradientError,
    SupdefConvergenceError,
    curvature_at_origin,
    dilate,
    signed_curvature,
    sup_curvature_estimate,
)
from .extremizer import (
    ExtremizerCheckReport,
    ExtremizerSource,
    limit_ratio_check,
    measure_normalized_extremizer,
    run_extremizer_checks,
    w_eval,
    w_jet,
)
from .harness_cli import (
    CounterexampleError,
    FalsifyReport,
    FClassSpec,
    falsify_batch,
    sample_claim2_measure,
    sample_f_class,
    sample_two_sign_change_density,
    sweep_symmetric,
)
from .levelset import (
    LevelCurve,
    TraceError,
    TraceOptions,
    circle_fit_curvature,
    cone_containment,
    is_simple_arc,
    trace_zero_set,
)
from .poisson_eval import (
    EvaluationGuardError,
    Jet2,
    MeasureEvaluator,
    Point,
    evaluate_jet,
    kernel_jet,
    origin_jet_closed,
)
from .rearrangement import (
    CurvatureBoundError,
    PivotNotFoundError,
    PivotResult,
    RearrangementTrace,
    claim2_pivot,
    run_eps_rearrangement,
    run_rearrangement,
    sweep_pair_step,
)
from .transport_maps import (
    TransportParams,
    decompose_check,
    eps_transport_measure,
    h_curvature_closed,
    nu_measure,
    transport_curvature_closed,
    transport_measure,
)

__version__ = "0.1.0"
