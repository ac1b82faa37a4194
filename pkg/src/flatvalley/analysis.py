"""Limit extraction and instability evidence for rescaled families.

The pipeline here is: read each family member in tube coordinates
(``coordinate_traces``), check the transverse coordinate shrinks at the
conservation-law rate and the coordinate velocities/accelerations stay
bounded uniformly in eps, extract the uniform limit curve from the
smallest-eps member (``extract_limit``) with a Cauchy diagnostic standing
in for compactness, and finally assemble an :class:`InstabilityCertificate`:
concrete evidence that trajectories launched with initial speeds eps_j |v|
(going to zero) still reach distance R/2 from the equilibrium point p at
physical time tau*/eps_j.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .dynamics import (
    FamilyResult,
    IntegratorOptions,
    PhaseState,
    Trajectory,
    integrate_newton,
)
from .errors import (
    ChartDomainError,
    DegenerateLimitError,
    FlowDomainError,
    IndeterminateCertificateError,
    InvalidParameterError,
    ScheduleTooShortError,
    UnverifiedLimitError,
)
from .geometry import FLOW_BASE_STEP, MChart, foot_point, pullback_metric_min

Array = np.ndarray


@dataclass(eq=False)
class CoordinateTrace:
    """One family member in tube coordinates, with FD derivatives.

    First derivatives are second-order central differences (one-sided at the
    endpoints); the second derivative is NaN at the two boundary samples,
    which consumers must exclude.
    """

    epsilon: float
    tau: Array
    r: Array             # (N,)
    y: Array             # (N, n-1)
    rdot: Array
    ydot: Array
    yddot: Array         # NaN at endpoints
    trajectory: Trajectory


def coordinate_traces(chart: MChart, family: FamilyResult) -> List[CoordinateTrace]:
    """Read every member through the chart on the family's common grid."""
    fld = chart.field
    out = []
    spacing = float(family.tau[1] - family.tau[0])
    for j, traj in enumerate(family.members):
        rvals = fld.value_many(traj.x)
        n_flow = max(8, int(np.ceil((np.abs(rvals).max() + 1e-3) / FLOW_BASE_STEP)))
        ys = np.empty((len(traj.tau), chart.dim - 1))
        for i, x in enumerate(traj.x):
            try:
                ys[i] = chart.coords_of(x, flow_steps=n_flow).y
            except (ChartDomainError, FlowDomainError) as exc:
                raise ChartDomainError(
                    f"tube violation at member j={j}, tau={traj.tau[i]:g}: {exc}") from exc
        rdot = np.gradient(rvals, spacing, edge_order=2)
        ydot = np.gradient(ys, spacing, axis=0, edge_order=2)
        yddot = np.full_like(ys, np.nan)
        yddot[1:-1] = (ys[2:] - 2.0 * ys[1:-1] + ys[:-2]) / (spacing * spacing)
        out.append(CoordinateTrace(
            epsilon=traj.epsilon, tau=traj.tau, r=rvals, y=ys,
            rdot=rdot, ydot=ydot, yddot=yddot, trajectory=traj))
    return out


def metric_min_for_traces(chart: MChart, traces: List[CoordinateTrace],
                          n_grid: int = 7, pad: float = 1.1):
    """Pullback-metric minimum over the coordinate box the traces visit."""
    r_lo = min(float(t.r.min()) for t in traces)
    r_hi = max(float(t.r.max()) for t in traces)
    mid, half = 0.5 * (r_lo + r_hi), 0.5 * (r_hi - r_lo)
    half = max(half * pad, 1e-3)
    y_box = np.zeros(chart.dim - 1)
    for t in traces:
        y_box = np.maximum(y_box, np.abs(t.y).max(axis=0))
    y_box = y_box * pad + 1e-3
    corner = float(np.linalg.norm(y_box))
    if corner > 0.999 * chart.delta:  # keep the probe grid inside the chart
        y_box *= 0.999 * chart.delta / corner
    return pullback_metric_min(chart, r_range=(mid - half, mid + half),
                               y_box=y_box, n_grid=n_grid)


@dataclass(eq=False)
class CoordinateBoundsReport:
    """Transverse-coordinate and coordinate-velocity bounds per member.

    The transverse coordinate must shrink with eps and stay below the
    conservation budget g^-1(eps^2 |v|^2 / 2); coordinate velocities must
    stay below |v|/sqrt(m) with m the pullback-metric minimum.  The metric
    clause is diagnostic (m is a grid estimate, not a certified minimum).
    """

    epsilons: Array
    sup_r: Array
    r_bounds: Array
    r_bounds_ok: bool
    shrinking: bool
    metric_min: float
    velocity_bound: float
    max_rdot: Array
    max_ydot: Array
    velocity_ok: bool
    slack: float

    @property
    def passed(self) -> bool:
        return self.r_bounds_ok and self.shrinking and self.velocity_ok


def coordinate_bounds_report(traces: List[CoordinateTrace], potential, v,
                             m_estimate, slack: float = 1e-6) -> CoordinateBoundsReport:
    if potential.profile.inverse is None:
        raise InvalidParameterError(
            "the profile does not expose an inverse; cannot form the transverse bound")
    m_value = getattr(m_estimate, "value", m_estimate)
    if m_value <= 0:
        raise InvalidParameterError("metric minimum must be positive")
    vnorm = float(np.linalg.norm(np.asarray(v, dtype=float)))
    eps = np.array([t.epsilon for t in traces])
    sup_r = np.array([float(np.abs(t.r).max()) for t in traces])
    bounds = np.array([potential.profile.inverse(0.5 * e * e * vnorm * vnorm) for e in eps])
    r_ok = bool(np.all(sup_r <= bounds * (1.0 + slack)))
    shrinking = all(sup_r[j + 1] <= sup_r[j] * (1.0 + 1e-9) + 1e-15
                    for j in range(len(sup_r) - 1))
    vb = vnorm / np.sqrt(m_value)
    max_rdot = np.array([float(np.abs(t.rdot).max()) for t in traces])
    max_ydot = np.array([float(np.abs(t.ydot).max()) for t in traces])
    velocity_ok = bool(np.all(max_rdot <= vb * (1.0 + slack))
                       and np.all(max_ydot <= vb * (1.0 + slack)))
    return CoordinateBoundsReport(
        epsilons=eps, sup_r=sup_r, r_bounds=bounds, r_bounds_ok=r_ok,
        shrinking=shrinking, metric_min=float(m_value), velocity_bound=float(vb),
        max_rdot=max_rdot, max_ydot=max_ydot, velocity_ok=velocity_ok, slack=slack)


@dataclass(eq=False)
class AccelerationReport:
    """Uniform bound on the tangential coordinate accelerations.

    ``bound`` is the largest interior |yddot| over all members; the family
    is uniform when the per-member maxima stay within ``ratio_bound`` of
    each other (accelerations must not blow up as eps shrinks).  Members
    with negligible acceleration make the ratio vacuous and pass trivially.
    """

    per_member: Array
    bound: float
    ratio: float
    ratio_bound: float
    uniform_ok: bool
    excluded_samples: tuple = (0, -1)


#: second differences of O(1) coordinates on the common grid cannot be
#: trusted below this scale (rounding alone contributes ~4 eps / spacing^2)
_ACCEL_NOISE_FLOOR = 1e-8


def acceleration_uniformity(traces: List[CoordinateTrace],
                            ratio_bound: float = 4.0) -> AccelerationReport:
    per = []
    for t in traces:
        norms = np.linalg.norm(t.yddot[1:-1], axis=1)
        per.append(float(norms.max()))
    per = np.array(per)
    c = float(per.max())
    if c <= _ACCEL_NOISE_FLOOR:
        # straight-line families: every acceleration is below measurement noise
        return AccelerationReport(per_member=per, bound=c, ratio=float("nan"),
                                  ratio_bound=ratio_bound, uniform_ok=True)
    ratio = c / max(float(per.min()), _ACCEL_NOISE_FLOOR)
    return AccelerationReport(per_member=per, bound=c, ratio=ratio,
                              ratio_bound=ratio_bound, uniform_ok=ratio <= ratio_bound)


@dataclass(eq=False)
class LimitCurve:
    """The uniform limit of the family, represented by its best member.

    Positions are the smallest-eps member projected onto the valley floor
    (no extrapolation: the convergence rate is unknown, so extrapolating
    would be unjustified).  ``verified`` records the Cauchy verdict.
    """

    tau: Array
    x: Array
    velocity: Array
    xdot0: Array
    p: Array
    verified: bool
    source_epsilon: float
    initial_velocity_error: float


@dataclass(eq=False)
class ConvergenceReport:
    """Cauchy diagnostic for the family on its fixed grid.

    ``distances[j]`` is the sup distance between members j and j+1.  The
    verdict passes when the distances are non-increasing from j = 1 on
    (one pre-asymptotic pair is allowed) and the last one is below
    ``tol_limit``.  ``rate_estimates`` are the measured consecutive ratios,
    reported without asserting any order of convergence.
    """

    epsilons: Array
    distances: Array
    monotone: List[bool]
    tol_limit: float
    cauchy_ok: bool
    violation_max: Array
    rate_estimates: Array


def extract_limit(family: FamilyResult, tol_limit: Optional[float] = None):
    """Extract the limit curve and its convergence diagnostic.

    Needs at least 3 members.  The default ``tol_limit`` is twice the
    ambient half-width of the conservation tube of the second-smallest
    member, 2 g^-1(eps^2 |v|^2 / 2) / |grad f(p)|: consecutive members
    agreeing to the width the theory confines them to is exactly what the
    diagnostic can demand without assuming a convergence rate.
    """
    if family.count < 3:
        raise InvalidParameterError("limit extraction needs at least 3 family members")
    fld = family.potential.field
    vnorm = float(np.linalg.norm(family.v))
    eps = family.epsilons
    members = family.members
    d = np.array([
        float(np.max(np.linalg.norm(members[j].x - members[j + 1].x, axis=1)))
        for j in range(len(members) - 1)
    ])
    monotone = [bool(d[j] <= d[j - 1] * (1.0 + 1e-3) + 1e-12) for j in range(1, len(d))]
    if tol_limit is None:
        if family.potential.profile.inverse is None:
            raise InvalidParameterError(
                "profile has no inverse; pass tol_limit explicitly")
        budget = 0.5 * eps[-2] ** 2 * vnorm * vnorm
        gradn = float(np.linalg.norm(fld.gradient(family.p)))
        tol_limit = 2.0 * family.potential.profile.inverse(budget) / gradn
    cauchy_ok = bool(all(monotone) and d[-1] <= tol_limit)

    best = members[-1]
    rmax = float(np.abs(fld.value_many(best.x)).max())
    n_flow = max(8, int(np.ceil((rmax + 1e-3) / FLOW_BASE_STEP)))
    x_lim = np.empty_like(best.x)
    for i, xi in enumerate(best.x):
        x_lim[i] = foot_point(fld, xi, n_steps=n_flow)
    resid = float(np.abs(fld.value_many(x_lim)).max())
    if resid > 1e-10:
        raise FlowDomainError(f"projection left |f| = {resid:.3e} > 1e-10 on the limit")
    spacing = float(best.tau[1] - best.tau[0])
    velocity = np.gradient(x_lim, spacing, axis=0, edge_order=2)
    c = (len(best.tau) - 1) // 2
    xdot0 = (-x_lim[c + 2] + 8.0 * x_lim[c + 1] - 8.0 * x_lim[c - 1] + x_lim[c - 2]) / (12.0 * spacing)
    limit = LimitCurve(
        tau=best.tau, x=x_lim, velocity=velocity, xdot0=xdot0, p=family.p,
        verified=cauchy_ok, source_epsilon=float(eps[-1]),
        initial_velocity_error=float(np.linalg.norm(xdot0 - family.v)))
    violations = np.array([float(np.abs(fld.value_many(m.x)).max()) for m in members])
    report = ConvergenceReport(
        epsilons=eps, distances=d, monotone=monotone, tol_limit=float(tol_limit),
        cauchy_ok=cauchy_ok, violation_max=violations,
        rate_estimates=np.array([d[j] / max(d[j + 1], 1e-300) for j in range(len(d) - 1)]))
    return limit, report


def physical_evidence_runs(potential, p, v, epsilons, tau_star: float,
                           opts: IntegratorOptions = IntegratorOptions()) -> List[Trajectory]:
    """Physical (unrescaled) runs with initial speed eps_j |v| up to tau*/eps_j."""
    if tau_star <= 0:
        raise InvalidParameterError("tau_star must be positive")
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    runs = []
    for eps in np.asarray(epsilons, dtype=float):
        runs.append(integrate_newton(
            potential, PhaseState(p, eps * v), tau_star / eps, opts, epsilon=float(eps)))
    return runs


@dataclass(eq=False)
class InstabilityCertificate:
    """Checkable escape evidence for the equilibrium (p, 0).

    ``escape_radius`` R is the largest distance the limit curve reaches
    from p on [0, T], at rescaled time ``tau_star``; from index ``j0`` on,
    every member sits within R/2 of the limit there, so each physical
    trajectory, despite its initial speed eps_j |v| -> 0, is at distance
    at least R/2 from p at time tau*/eps_j.
    """

    verdict: str
    escape_radius: float
    tau_star: float
    threshold: float
    j0: int
    epsilons: Array
    member_distances: Array
    evidence: List[dict]
    tol_r: float
    p: Array
    v: Array


def certify_instability(family: FamilyResult, limit: LimitCurve,
                        physical_runs: List[Trajectory],
                        tol_r: Optional[float] = None) -> InstabilityCertificate:
    """Assemble the certificate, or raise an indeterminate-certificate error.

    Preconditions: the limit passed its convergence diagnostic, and
    ``physical_runs[j]`` is the physical solution with initial velocity
    eps_j v integrated exactly to tau*/eps_j.
    """
    if not limit.verified:
        raise UnverifiedLimitError(
            "the family did not pass the Cauchy diagnostic; no certificate")
    p = family.p
    vnorm = float(np.linalg.norm(family.v))
    spacing = float(limit.tau[1] - limit.tau[0])
    if tol_r is None:
        tol_r = 10.0 * spacing * vnorm
    c = (len(limit.tau) - 1) // 2
    dist = np.linalg.norm(limit.x[c:] - p, axis=1)
    i_star = int(np.argmax(dist))
    radius = float(dist[i_star])
    tau_star = float(limit.tau[c + i_star])
    if radius <= tol_r:
        raise DegenerateLimitError(
            f"limit curve never leaves the noise ball: R = {radius:.3e} <= tol {tol_r:.3e}")
    member_d = np.array([
        float(np.linalg.norm(m.x[c + i_star] - limit.x[c + i_star]))
        for m in family.members
    ])
    close = member_d < 0.5 * radius
    j0 = None
    for j in range(len(close)):
        if np.all(close[j:]):
            j0 = j
            break
    if j0 is None:
        raise ScheduleTooShortError(
            "no index from which every member stays within R/2 of the limit at tau*; "
            "extend the eps schedule")
    if len(physical_runs) != family.count:
        raise InvalidParameterError("need one physical run per family member")
    evidence = []
    for j in range(j0, family.count):
        eps = float(family.epsilons[j])
        run = physical_runs[j]
        t_end = float(run.tau[-1])
        if abs(t_end * eps - tau_star) > 1e-9 * max(1.0, tau_star):
            raise InvalidParameterError(
                f"physical run j={j} ends at t={t_end:g}, expected tau*/eps = {tau_star / eps:g}")
        disp = float(np.linalg.norm(run.x[-1] - p))
        if disp < 0.5 * radius:
            raise IndeterminateCertificateError(
                f"physical displacement at j={j} is {disp:.6g} < R/2 = {0.5 * radius:.6g}")
        evidence.append({
            "j": j,
            "eps": eps,
            "initial_speed": eps * vnorm,
            "escape_time": tau_star / eps,
            "displacement": disp,
        })
    return InstabilityCertificate(
        verdict="UNSTABLE", escape_radius=radius, tau_star=tau_star,
        threshold=0.5 * radius, j0=j0, epsilons=family.epsilons,
        member_distances=member_d, evidence=evidence, tol_r=float(tol_r),
        p=p.copy(), v=family.v.copy())


def revalidate_certificate(cert: InstabilityCertificate, family: FamilyResult,
                           limit: LimitCurve, physical_runs: List[Trajectory],
                           rtol: float = 1e-9) -> bool:
    """Re-derive every certificate number from the stored trajectories."""
    p = cert.p
    c = (len(limit.tau) - 1) // 2
    dist = np.linalg.norm(limit.x[c:] - p, axis=1)
    i_star = int(np.argmax(dist))
    if abs(float(dist[i_star]) - cert.escape_radius) > rtol * max(1.0, cert.escape_radius):
        return False
    if abs(float(limit.tau[c + i_star]) - cert.tau_star) > rtol:
        return False
    for j, m in enumerate(family.members):
        d = float(np.linalg.norm(m.x[c + i_star] - limit.x[c + i_star]))
        if abs(d - cert.member_distances[j]) > rtol * max(1.0, d):
            return False
        if j >= cert.j0 and not d < cert.threshold:
            return False
    for row in cert.evidence:
        run = physical_runs[row["j"]]
        disp = float(np.linalg.norm(run.x[-1] - p))
        if abs(disp - row["displacement"]) > rtol * max(1.0, disp):
            return False
        if disp < cert.threshold:
            return False
    return True
