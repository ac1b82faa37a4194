"""Newtonian dynamics for valley potentials and its slow-velocity rescaling.

Two Cauchy problems are integrated with the same symplectic core:

* physical:  xdd = -grad U(x),            x(0) = p, xd(0) = eps * v
* rescaled:  xdd = -(1/eps^2) grad U(x),  x(0) = p, xd(0) = v

related by x_resc(tau) = x_phys(tau / eps).  The rescaled family with a
geometric eps schedule is the object the analysis module extracts limits
from; conservation of H = |xd|^2/2 + U/eps^2 gives sharp a-priori bounds
(speed, sublevel confinement, ball confinement) that every run is audited
against.

Output grids: every trajectory is reported on an equispaced grid whose
nodes are exact integrator states (the internal step is snapped to divide
the output spacing), so audits and cross-member comparisons never see
interpolation error.  Dense internal states are kept on the trajectory for
derivative work; ``sample`` interpolates them with a cubic spline.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import List, Optional

import numpy as np

from .errors import BlowUpError, InvalidParameterError, ScenarioError
from .fields import CompositePotential, gallery_lookup
from .integrators import integrate

Array = np.ndarray


@dataclass(frozen=True, eq=False)
class PhaseState:
    """A configuration point and its velocity."""

    x: Array
    v: Array

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))
        if self.x.shape != self.v.shape or self.x.ndim != 1:
            raise InvalidParameterError("position and velocity must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.v))):
            raise InvalidParameterError("phase state entries must be finite")


@dataclass(frozen=True)
class IntegratorOptions:
    """Stepper choice and resolution knobs.

    ``step_factor`` is the c in dtau = c * eps for rescaled runs; physical
    runs use dt = c directly, so a rescaled run and its physical twin have
    the same resolution per unit of rescaled time.
    """

    method: str = "pefrl"
    step_factor: float = 0.01
    n_out: int = 401
    blowup_radius: float = 1e6

    def __post_init__(self):
        if self.step_factor <= 0:
            raise InvalidParameterError("step_factor must be positive")
        if self.n_out < 3 or self.n_out % 2 != 1:
            raise InvalidParameterError("n_out must be an odd integer >= 3")


@dataclass(eq=False)
class Trajectory:
    """A sampled solution with its dense internal states.

    ``tau``/``x``/``v`` live on the equispaced output grid (401 nodes by
    default); the ``*_int`` arrays hold every internal step.  Output nodes
    coincide with internal nodes by construction.
    """

    kind: str                 # "physical" | "rescaled"
    epsilon: Optional[float]
    tau: Array
    x: Array
    v: Array
    dt: float
    tau_int: Array
    x_int: Array
    v_int: Array

    def __post_init__(self):
        self._sampler = None

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def center_index(self) -> int:
        """Output index of tau = 0 (rescaled) or t = 0 (physical)."""
        return (len(self.tau) - 1) // 2 if self.kind == "rescaled" else 0

    def state(self, i: int) -> PhaseState:
        return PhaseState(self.x[i], self.v[i])

    def sample(self, taus):
        """Cubic-spline positions and velocities at arbitrary interior times."""
        if self._sampler is None:
            from scipy.interpolate import CubicSpline

            self._sampler = (
                CubicSpline(self.tau_int, self.x_int, axis=0),
                CubicSpline(self.tau_int, self.v_int, axis=0),
            )
        sx, sv = self._sampler
        taus = np.asarray(taus, dtype=float)
        return sx(taus), sv(taus)


def _accel(potential, scale: float):
    grad = potential.gradient_fast
    if scale == 1.0:
        return lambda x: -grad(x)
    return lambda x: -scale * grad(x)


def _snap_step(spacing: float, target: float) -> int:
    """Substeps per output interval so the internal step divides the spacing."""
    return max(1, int(math.ceil(spacing / target - 1e-12)))


def integrate_newton(potential, s0: PhaseState, t_end: float,
                     opts: IntegratorOptions = IntegratorOptions(),
                     epsilon: Optional[float] = None) -> Trajectory:
    """Integrate xdd = -grad U(x) on [0, t_end] from the given state."""
    if t_end <= 0:
        raise InvalidParameterError("t_end must be positive")
    if s0.x.size != potential.dim:
        raise InvalidParameterError("initial state dimension does not match the potential")
    n_out = opts.n_out
    spacing = t_end / (n_out - 1)
    m = _snap_step(spacing, opts.step_factor)
    dt = spacing / m
    steps = (n_out - 1) * m
    X, V = integrate(_accel(potential, 1.0), s0.x, s0.v, dt, steps,
                     method=opts.method, blowup_radius=opts.blowup_radius)
    return Trajectory(
        kind="physical",
        epsilon=epsilon,
        tau=np.arange(n_out) * spacing,
        x=X[::m].copy(),
        v=V[::m].copy(),
        dt=dt,
        tau_int=np.arange(steps + 1) * dt,
        x_int=X,
        v_int=V,
    )


def integrate_rescaled(potential, p, v, eps: float, T: float,
                       opts: IntegratorOptions = IntegratorOptions()) -> Trajectory:
    """Integrate xdd = -(1/eps^2) grad U(x) on [-T, T] from (p, v).

    The backward half is obtained by running forward from (p, -v) and
    reflecting time, so a single stepper code path covers both halves.
    The solution exists globally for every eps; a blow-up therefore means
    the step size failed to resolve the stiffness and is reported as an
    integrator failure.
    """
    if eps <= 0:
        raise InvalidParameterError("eps must be positive")
    if T <= 0:
        raise InvalidParameterError("horizon T must be positive")
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    if p.shape != (potential.dim,) or v.shape != (potential.dim,):
        raise InvalidParameterError("p and v must match the potential dimension")
    half = (opts.n_out - 1) // 2
    spacing = T / half
    m = _snap_step(spacing, opts.step_factor * eps)
    dt = spacing / m
    steps = half * m
    accel = _accel(potential, 1.0 / (eps * eps))
    try:
        Xf, Vf = integrate(accel, p, v, dt, steps,
                           method=opts.method, blowup_radius=opts.blowup_radius)
    except BlowUpError as exc:
        raise BlowUpError(
            f"rescaled run blew up on the forward half (eps={eps:g}); the solution exists "
            f"globally, so this is an integrator failure: {exc}",
            last_time=exc.last_time, last_state=exc.last_state) from exc
    try:
        Xb, Vb = integrate(accel, p, -v, dt, steps,
                           method=opts.method, blowup_radius=opts.blowup_radius)
    except BlowUpError as exc:
        last = None if exc.last_time is None else -exc.last_time
        raise BlowUpError(
            f"rescaled run blew up on the backward half (eps={eps:g}); the solution exists "
            f"globally, so this is an integrator failure: {exc}",
            last_time=last, last_state=exc.last_state) from exc
    x_int = np.concatenate([Xb[:0:-1], Xf])
    v_int = np.concatenate([-Vb[:0:-1], Vf])
    return Trajectory(
        kind="rescaled",
        epsilon=eps,
        tau=np.arange(-half, half + 1) * spacing,
        x=x_int[::m].copy(),
        v=v_int[::m].copy(),
        dt=dt,
        tau_int=np.arange(-steps, steps + 1) * dt,
        x_int=x_int,
        v_int=v_int,
    )


def rescale_trajectory(traj: Trajectory, eps: float,
                       horizon: Optional[float] = None) -> Trajectory:
    """Map a physical run to rescaled time: tau = eps t, velocity / eps.

    When ``horizon`` is given, the physical grid must cover [0, horizon/eps].
    """
    if traj.kind != "physical":
        raise InvalidParameterError("rescale_trajectory expects a physical trajectory")
    if eps <= 0:
        raise InvalidParameterError("eps must be positive")
    if horizon is not None and traj.tau[-1] * eps < horizon * (1.0 - 1e-12):
        raise InvalidParameterError(
            f"grid too short: physical run ends at t = {traj.tau[-1]:g}, "
            f"need {horizon / eps:g} to cover the rescaled horizon {horizon:g}")
    return Trajectory(
        kind="rescaled",
        epsilon=eps,
        tau=eps * traj.tau,
        x=traj.x.copy(),
        v=traj.v / eps,
        dt=eps * traj.dt,
        tau_int=eps * traj.tau_int,
        x_int=traj.x_int.copy(),
        v_int=traj.v_int / eps,
    )


@dataclass(eq=False)
class EnergyReport:
    """Conservation audit of H = |v|^2/2 + U/eps^2 along a rescaled run.

    ``drift`` is max |H - H(0)| / max(|H(0)|, 1e-300) over every internal
    step; ``values`` carries H on the output grid for serialization.
    """

    epsilon: float
    h0: float
    drift: float
    values: Array


def energy_audit(traj: Trajectory, potential) -> EnergyReport:
    if traj.kind != "rescaled" or traj.epsilon is None:
        raise InvalidParameterError("energy_audit expects a rescaled trajectory")
    eps = traj.epsilon
    kinetic = 0.5 * np.einsum("ij,ij->i", traj.v_int, traj.v_int)
    H = kinetic + potential.value_many(traj.x_int) / (eps * eps)
    center = (len(H) - 1) // 2
    h0 = float(H[center])
    drift = float(np.max(np.abs(H - h0)) / max(abs(h0), 1e-300))
    m = (len(traj.tau_int) - 1) // (len(traj.tau) - 1)
    return EnergyReport(epsilon=eps, h0=h0, drift=drift, values=H[::m].copy())


@dataclass(eq=False)
class BoundsCheck:
    """Conservation-law confinement verdicts for one rescaled run.

    speed:      max |xd|      <= |v| (1 + slack)
    sublevel:   max U         <= eps^2 |v|^2 / 2 (1 + slack)
    ball:       |x(tau) - p|  <= |tau| |v| (1 + slack) at every node
    """

    epsilon: float
    v_norm: float
    slack: float
    max_speed: float
    max_potential: float
    max_displacement: float
    worst_ball_ratio: float
    speed_ok: bool
    sublevel_ok: bool
    ball_ok: bool

    @property
    def passed(self) -> bool:
        return self.speed_ok and self.sublevel_ok and self.ball_ok


def confinement_check(traj: Trajectory, potential, v, slack: float = 1e-6) -> BoundsCheck:
    """Check the a-priori speed/sublevel/ball bounds on every internal step."""
    if traj.kind != "rescaled" or traj.epsilon is None:
        raise InvalidParameterError("confinement_check expects a rescaled trajectory")
    eps = traj.epsilon
    v = np.asarray(v, dtype=float)
    vnorm = float(np.linalg.norm(v))
    center = (len(traj.tau_int) - 1) // 2
    p = traj.x_int[center]
    speeds = np.linalg.norm(traj.v_int, axis=1)
    pots = potential.value_many(traj.x_int)
    disps = np.linalg.norm(traj.x_int - p, axis=1)
    taus = np.abs(traj.tau_int)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(taus > 0, disps / np.where(taus > 0, taus * vnorm, 1.0), 0.0)
    if vnorm == 0.0:
        worst_ratio = float(np.max(disps))  # must be identically zero
        ball_ok = worst_ratio == 0.0
    else:
        worst_ratio = float(np.max(ratios))
        ball_ok = worst_ratio <= 1.0 + slack
    max_speed = float(np.max(speeds))
    max_pot = float(np.max(pots))
    return BoundsCheck(
        epsilon=eps,
        v_norm=vnorm,
        slack=slack,
        max_speed=max_speed,
        max_potential=max_pot,
        max_displacement=float(np.max(disps)),
        worst_ball_ratio=worst_ratio,
        speed_ok=max_speed <= vnorm * (1.0 + slack),
        sublevel_ok=max_pot <= 0.5 * eps * eps * vnorm * vnorm * (1.0 + slack),
        ball_ok=ball_ok,
    )


@dataclass(eq=False)
class Scenario:
    """A validated experiment description.

    p must lie on the valley floor and v must be tangent to it there; the
    eps schedule eps_j = eps0 * ratio^j is capped below by ``min_eps``
    because step-size adequacy far below 1e-4 has not been studied.
    """

    potential: CompositePotential
    p: Array
    v: Array
    horizon: float
    eps0: float = 0.1
    ratio: float = 0.5
    count: int = 6
    options: IntegratorOptions = field(default_factory=IntegratorOptions)
    slack: float = 1e-6
    tol_on_m: float = 1e-9
    tol_tangent: float = 1e-8
    min_eps: float = 1e-4
    name: str = "scenario"

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        P = self.potential
        if not isinstance(P, CompositePotential):
            raise ScenarioError("scenario potentials must be composite (g of f)")
        if self.p.shape != (P.dim,) or self.v.shape != (P.dim,):
            raise ScenarioError(f"p and v must be {P.dim}-vectors")
        fval = abs(P.field.value(self.p))
        if fval > self.tol_on_m:
            raise ScenarioError(
                f"p is not on the valley floor: |f(p)| = {fval:.3e} > {self.tol_on_m:g}")
        vnorm = float(np.linalg.norm(self.v))
        if vnorm == 0.0:
            raise ScenarioError("v must be nonzero")
        g = P.field.gradient(self.p)
        cosine = abs(float(g @ self.v)) / (float(np.linalg.norm(g)) * vnorm)
        if cosine > self.tol_tangent:
            raise ScenarioError(
                f"v is not tangent to the valley floor at p: cosine = {cosine:.3e}")
        if self.horizon <= 0:
            raise ScenarioError("horizon must be positive")
        if self.eps0 <= 0:
            raise ScenarioError("eps0 must be positive")
        if not (0.0 < self.ratio < 1.0):
            raise ScenarioError("ratio must lie in (0, 1)")
        if self.count < 1:
            raise ScenarioError("count must be at least 1")
        if self.epsilons[-1] < self.min_eps:
            raise ScenarioError(
                f"smallest eps {self.epsilons[-1]:.3e} is below the cap {self.min_eps:g}; "
                "shorten the schedule or lower min_eps explicitly")

    @property
    def epsilons(self) -> Array:
        return self.eps0 * self.ratio ** np.arange(self.count)


@dataclass(eq=False)
class FamilyResult:
    """Rescaled trajectories for a geometric eps schedule on one output grid."""

    potential: CompositePotential
    p: Array
    v: Array
    horizon: float
    options: IntegratorOptions
    epsilons: Array
    tau: Array
    members: List[Trajectory]
    energies: List[EnergyReport]
    bounds: List[BoundsCheck]

    @property
    def count(self) -> int:
        return len(self.members)


def _member_payload(record, p, v, eps, T, opts: IntegratorOptions):
    return (record, np.asarray(p, float), np.asarray(v, float), float(eps),
            float(T), asdict(opts))


def _member_worker(payload):
    record, p, v, eps, T, opts_dict = payload
    potential = gallery_lookup(record["kind"], record.get("params", {}))
    return integrate_rescaled(potential, p, v, eps, T, IntegratorOptions(**opts_dict))


def family_from_runs(potential, p, v, T, epsilons,
                     opts: IntegratorOptions = IntegratorOptions(),
                     slack: float = 1e-6, jobs: int = 1) -> FamilyResult:
    """Integrate one rescaled run per eps and audit each of them.

    Members are independent; with ``jobs`` > 1 and a gallery potential they
    fan out to a process pool.  A failing member aborts the family with its
    index attached.
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    epsilons = np.asarray(list(epsilons), dtype=float)
    members: List[Trajectory] = []
    if jobs > 1 and potential.spec_record is not None:
        payloads = [_member_payload(potential.spec_record, p, v, e, T, opts)
                    for e in epsilons]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_member_worker, pl) for pl in payloads]
            for j, fut in enumerate(futures):
                try:
                    members.append(fut.result())
                except BlowUpError as exc:
                    raise BlowUpError(
                        f"family member j={j} (eps={epsilons[j]:g}) failed: {exc}",
                        last_time=exc.last_time, last_state=exc.last_state) from exc
    else:
        for j, eps in enumerate(epsilons):
            try:
                members.append(integrate_rescaled(potential, p, v, eps, T, opts))
            except BlowUpError as exc:
                raise BlowUpError(
                    f"family member j={j} (eps={eps:g}) failed: {exc}",
                    last_time=exc.last_time, last_state=exc.last_state) from exc
    energies = [energy_audit(traj, potential) for traj in members]
    bounds = [confinement_check(traj, potential, v, slack) for traj in members]
    return FamilyResult(
        potential=potential, p=p, v=v, horizon=float(T), options=opts,
        epsilons=epsilons, tau=members[0].tau, members=members,
        energies=energies, bounds=bounds,
    )


def run_family(scenario: Scenario, jobs: int = 1) -> FamilyResult:
    """Run the scenario's eps family with its own options and slack."""
    return family_from_runs(
        scenario.potential, scenario.p, scenario.v, scenario.horizon,
        scenario.epsilons, scenario.options, scenario.slack, jobs=jobs,
    )


def halving_error(potential, p, v, eps: float, T: float,
                  opts: IntegratorOptions = IntegratorOptions()) -> float:
    """Sup-norm change of a rescaled run when the internal step is halved.

    A cheap a-posteriori discretization error estimate used by the
    two-route consistency checks.
    """
    coarse = integrate_rescaled(potential, p, v, eps, T, opts)
    fine_opts = IntegratorOptions(
        method=opts.method, step_factor=opts.step_factor / 2.0,
        n_out=opts.n_out, blowup_radius=opts.blowup_radius)
    fine = integrate_rescaled(potential, p, v, eps, T, fine_opts)
    return float(np.max(np.linalg.norm(coarse.x - fine.x, axis=1)))
