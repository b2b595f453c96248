"""hcflow: mixed-volume-preserving curvature flows of h-convex hypersurfaces
in hyperbolic space -- simulator and invariant-checking laboratory.

The package integrates du/dt = -v (F - f) for radial graphs over geodesic
spheres in H^{n+1} (curvature -a^2), where F is a normalized, shifted
symmetric curvature function and f the nonlocal average that conserves one
chosen mixed volume V_{n+1-k}.  It measures the quantities the theory
controls (h-convexity margin, pinching ratio, radius gap, parabolicity,
exponential decay) and verifies them at desk scale.
"""

from . import kernels
from .ambient import (
    AmbientParams,
    ball_mixed_volume,
    ball_radius_for_mixed_volume,
    sphere_area,
    sphere_curvature,
    unit_sphere_area,
    warp,
    warp_deriv,
)
from .curvfn import (
    FAMILIES,
    AdmissibilityError,
    CurvatureSpec,
    GammaAlpha,
    GammaK,
    GammaPlus,
    cone_membership,
    elementary_symmetric_all,
    elementary_symmetric_gradient,
    complete_homogeneous_all,
    eval_F,
    grad_F,
    verify_assumptions,
)
from .diagnostics import (
    DiagnosticsRecord,
    FitError,
    check_evolution_identity,
    check_radius_gap,
    convergence_tail,
    fit_decay,
    isoperimetric_report,
    snapshot,
    verify_invariants,
    write_csv,
)
from .flow import (
    FlowConfig,
    FlowState,
    StepFailure,
    Trajectory,
    advance,
    flow_rhs,
    global_term,
    initial_state,
    run_flow,
)
from .hypersurface import (
    BACKENDS,
    GeometryError,
    GeometryFields,
    GraphPatch,
    RecenterError,
    all_mixed_volumes,
    area,
    build_geometry,
    inball_displacement,
    interpolate_radius,
    load_patch,
    make_initial,
    mixed_volume,
    quad_weights,
    radial_gap,
    recenter,
    recenter_to_inball,
    save_patch,
    surface_integral,
)

__version__ = "0.1.0"

KERNEL_LANE = kernels.LANE
