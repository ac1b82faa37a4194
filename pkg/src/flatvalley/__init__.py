"""flatvalley: a numerical laboratory for escape from flat potential valleys.

For potentials U = g(f) whose minimum set is the hypersurface M = {f = 0},
every equilibrium (p, 0) with p on M sits at the bottom of a valley with a
flat floor: trajectories launched along the floor with tiny speed eps|v|
travel along it, so in rescaled time they converge to a fixed escape curve
and the equilibrium is unstable no matter how small eps is.  This package
integrates the rescaled family, verifies the conservation-law confinement
bounds, extracts the limit curve with a Cauchy diagnostic, and emits a
checkable instability certificate, together with tubular-coordinate
diagnostics for the geometry that makes the argument work.
"""

from .fields import (
    CompositePotential,
    PlainPotential,
    Profile,
    RegularityReport,
    ScalarField,
    check_regular_value,
    circle,
    custom_polynomial,
    ellipsoid,
    fd_gradient_check,
    gallery_lookup,
    gutter,
    laloy,
    painleve,
    power_profile,
)
from .dynamics import (
    BoundsCheck,
    EnergyReport,
    FamilyResult,
    IntegratorOptions,
    PhaseState,
    Scenario,
    Trajectory,
    confinement_check,
    energy_audit,
    family_from_runs,
    halving_error,
    integrate_newton,
    integrate_rescaled,
    rescale_trajectory,
    run_family,
)
from .geometry import (
    FrameData,
    MChart,
    MetricMinEstimate,
    TubularCoords,
    build_m_chart,
    curvilinear_residual,
    flow_identity_residual,
    foot_point,
    frame_data,
    pullback_metric_min,
    residual_convergence,
    suggested_chart_radius,
    transversal_flow,
    tubular_coords,
)
from .analysis import (
    AccelerationReport,
    ConvergenceReport,
    CoordinateBoundsReport,
    CoordinateTrace,
    InstabilityCertificate,
    LimitCurve,
    acceleration_uniformity,
    certify_instability,
    coordinate_bounds_report,
    coordinate_traces,
    extract_limit,
    metric_min_for_traces,
    physical_evidence_runs,
    revalidate_certificate,
)
from .contrast import (
    BarrierInfo,
    TrapReport,
    locate_barrier,
    projection_trap_check,
    trapped_motion_check,
)
from .cli import chart_for_scenario, parse_scenario, run_pipeline

__version__ = "0.1.0"
