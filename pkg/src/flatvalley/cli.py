"""Command line: scenario files, the full pipeline, and artifact emission.

Scenario files are flat JSON documents::

    {
      "potential": {"kind": "circle", "exponent": 2},
      "p": [1.0, 0.0],
      "v": [0.0, 1.0],
      "horizon": 1.0,
      "eps0": 0.1, "ratio": 0.5, "count": 6,
      "step_factor": 0.01,
      "out": "runs/circle"
    }

Exit codes for ``certify``: 0 when the certificate verdict is UNSTABLE,
2 when the verdict is indeterminate (limit unverified, degenerate, or
schedule too short), 1 on hard errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .analysis import (
    acceleration_uniformity,
    certify_instability,
    coordinate_bounds_report,
    coordinate_traces,
    extract_limit,
    metric_min_for_traces,
    physical_evidence_runs,
    revalidate_certificate,
)
from .contrast import locate_barrier, projection_trap_check, trapped_motion_check
from .dynamics import (
    IntegratorOptions,
    Scenario,
    energy_audit,
    confinement_check,
    integrate_rescaled,
    run_family,
)
from .errors import (
    FlatValleyError,
    IndeterminateCertificateError,
    ScenarioError,
)
from .fields import CompositePotential, check_regular_value, fd_gradient_check, gallery_lookup
from .geometry import (
    build_m_chart,
    flow_identity_residual,
    foot_point,
    residual_convergence,
)
from .reporting import (
    bounds_payload,
    certificate_payload,
    convergence_payload,
    write_coords_csv,
    write_limit_csv,
    write_report_json,
    write_trajectory_csv,
)
from .svgplot import line_plot

_SCENARIO_KEYS = {
    "name", "potential", "p", "v", "horizon", "eps0", "ratio", "count",
    "step_factor", "integrator", "n_out", "slack", "tol_on_m", "tol_tangent",
    "min_eps", "out",
}


def parse_scenario(path, overrides: Optional[dict] = None) -> Scenario:
    """Load and validate a scenario file.

    p is snapped onto the valley floor when |f(p)| <= 1e-6 (error beyond);
    v is projected onto the tangent plane when its normal component is
    small (error beyond 10 percent).  ``overrides`` (CLI flags) replace
    file values before validation.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"scenario parse error in {path} at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ScenarioError("scenario file must contain a JSON object")
    unknown = set(raw) - _SCENARIO_KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario fields: {sorted(unknown)}")
    data = dict(raw)
    for key, val in (overrides or {}).items():
        if val is not None:
            data[key] = val
    for key in ("potential", "p", "v"):
        if key not in data:
            raise ScenarioError(f"scenario is missing the required field {key!r}")
    pot_spec = data["potential"]
    if not isinstance(pot_spec, dict) or "kind" not in pot_spec:
        raise ScenarioError("field 'potential' must be an object with a 'kind'")
    params = {k: v for k, v in pot_spec.items() if k != "kind"}
    potential = gallery_lookup(pot_spec["kind"], params)
    if not isinstance(potential, CompositePotential):
        raise ScenarioError(
            f"potential kind {pot_spec['kind']!r} is not a composite potential; "
            "plain gallery entries run through the 'gallery' subcommand")
    fld = potential.field
    p = np.asarray(data["p"], dtype=float)
    v = np.asarray(data["v"], dtype=float)
    if p.shape != (fld.dim,) or v.shape != (fld.dim,):
        raise ScenarioError(f"fields 'p' and 'v' must be {fld.dim}-vectors")
    fp = float(fld.value(p))
    if abs(fp) > 1e-4:
        raise ScenarioError(
            f"field 'p': |f(p)| = {abs(fp):.3e} is too far from the valley floor to snap")
    if abs(fp) > 0.0:
        p = foot_point(fld, p)
    g = fld.gradient(p)
    gn = float(np.linalg.norm(g))
    vn = float(np.linalg.norm(v))
    if vn == 0.0:
        raise ScenarioError("field 'v': must be nonzero")
    cosine = abs(float(g @ v)) / (gn * vn)
    if cosine > 0.1:
        raise ScenarioError(
            f"field 'v': not tangent to the valley floor at p (cosine = {cosine:.3e})")
    v = v - (float(v @ g) / (gn * gn)) * g
    opts = IntegratorOptions(
        method=data.get("integrator", "pefrl"),
        step_factor=float(data.get("step_factor", 0.01)),
        n_out=int(data.get("n_out", 401)),
    )
    return Scenario(
        potential=potential,
        p=p,
        v=v,
        horizon=float(data.get("horizon", 1.0)),
        eps0=float(data.get("eps0", 0.1)),
        ratio=float(data.get("ratio", 0.5)),
        count=int(data.get("count", 6)),
        options=opts,
        slack=float(data.get("slack", 1e-6)),
        tol_tangent=1e-8,
        min_eps=float(data.get("min_eps", 1e-4)),
        name=str(data.get("name", os.path.splitext(os.path.basename(path))[0])),
    )


def chart_for_scenario(scn: Scenario):
    """Chart sized to the ball the trajectories are confined to."""
    delta = 1.05 * scn.horizon * float(np.linalg.norm(scn.v))
    return build_m_chart(scn.potential.field, scn.p, scn.v, delta=delta)


@dataclass(eq=False)
class RunReport:
    """Pipeline outcome: per-stage status/wall-clock, file manifest, verdict."""

    out_dir: str
    stages: List[dict] = field(default_factory=list)
    manifest: List[str] = field(default_factory=list)
    verdict: str = "INDETERMINATE"
    reason: str = ""
    exit_code: int = 1

    def stage(self, name: str, status: str, seconds: float) -> None:
        self.stages.append({"name": name, "status": status, "seconds": seconds})


def run_pipeline(scenario: Scenario, out_dir: str, jobs: int = 1, svg: bool = True) -> RunReport:
    """family -> coordinates -> reports -> limit -> certificate -> files."""
    report = RunReport(out_dir=out_dir)
    os.makedirs(out_dir, exist_ok=True)
    payload = {"scenario": _scenario_payload(scenario)}
    state = {}

    def run_stage(name, fn):
        t0 = time.perf_counter()
        try:
            fn()
        except IndeterminateCertificateError as exc:
            report.stage(name, "indeterminate", time.perf_counter() - t0)
            report.verdict = "INDETERMINATE"
            report.reason = str(exc)
            report.exit_code = 2
            payload["certificate"] = {"verdict": "INDETERMINATE", "reason": str(exc)}
            return False
        except FlatValleyError as exc:
            report.stage(name, "error", time.perf_counter() - t0)
            report.verdict = "ERROR"
            report.reason = f"{type(exc).__name__}: {exc}"
            report.exit_code = 1
            payload.setdefault("errors", []).append(
                {"stage": name, "error": report.reason})
            return False
        report.stage(name, "ok", time.perf_counter() - t0)
        return True

    def stage_family():
        state["family"] = run_family(scenario, jobs=jobs)
        fam = state["family"]
        payload["family"] = {
            "epsilons": fam.epsilons,
            "energy_drifts": [e.drift for e in fam.energies],
            "bounds": bounds_payload(fam.bounds),
        }

    def stage_coordinates():
        fam = state["family"]
        chart = chart_for_scenario(scenario)
        traces = coordinate_traces(chart, fam)
        metric = metric_min_for_traces(chart, traces)
        cb = coordinate_bounds_report(traces, scenario.potential, scenario.v,
                                      metric, scenario.slack)
        acc = acceleration_uniformity(traces)
        state.update(chart=chart, traces=traces, metric=metric, coord_bounds=cb,
                     acceleration=acc)
        payload["coordinates"] = {
            "sup_r": cb.sup_r,
            "r_bounds": cb.r_bounds,
            "r_bounds_ok": cb.r_bounds_ok,
            "shrinking": cb.shrinking,
            "metric_min": cb.metric_min,
            "velocity_bound": cb.velocity_bound,
            "max_rdot": cb.max_rdot,
            "max_ydot": cb.max_ydot,
            "velocity_ok": cb.velocity_ok,
            "acceleration_per_member": acc.per_member,
            "acceleration_bound": acc.bound,
            "acceleration_ratio": acc.ratio,
            "acceleration_uniform_ok": acc.uniform_ok,
        }

    def stage_limit():
        limit, conv = extract_limit(state["family"])
        state.update(limit=limit, convergence=conv)
        payload["convergence"] = convergence_payload(conv, limit)

    def stage_certificate():
        fam, limit = state["family"], state["limit"]
        c = (len(limit.tau) - 1) // 2
        dist = np.linalg.norm(limit.x[c:] - fam.p, axis=1)
        tau_star = float(limit.tau[c + int(np.argmax(dist))])
        runs = physical_evidence_runs(scenario.potential, fam.p, fam.v,
                                      fam.epsilons, tau_star, scenario.options)
        cert = certify_instability(fam, limit, runs)
        ok = revalidate_certificate(cert, fam, limit, runs)
        state.update(certificate=cert, physical_runs=runs)
        payload["certificate"] = certificate_payload(cert)
        payload["certificate"]["revalidated_in_memory"] = bool(ok)
        report.verdict = cert.verdict
        report.exit_code = 0 if cert.verdict == "UNSTABLE" else 2

    def stage_emit():
        fam = state["family"]
        for j in range(fam.count):
            name = os.path.join(out_dir, f"traj_eps{j}.csv")
            write_trajectory_csv(name, fam.members[j], fam.energies[j].values)
            report.manifest.append(name)
        for j, trace in enumerate(state.get("traces", [])):
            name = os.path.join(out_dir, f"coords_eps{j}.csv")
            write_coords_csv(name, trace)
            report.manifest.append(name)
        if "limit" in state:
            name = os.path.join(out_dir, "limit.csv")
            write_limit_csv(name, state["limit"])
            report.manifest.append(name)
        if svg:
            report.manifest.extend(_figures(out_dir, scenario, state))
        report.manifest.sort()
        payload["manifest"] = [os.path.relpath(m, out_dir) for m in sorted(report.manifest)]
        name = os.path.join(out_dir, "report.json")
        write_report_json(name, payload)
        report.manifest.append(name)

    ok = run_stage("family", stage_family)
    ok = ok and run_stage("coordinates", stage_coordinates)
    ok = ok and run_stage("limit", stage_limit)
    ok = ok and run_stage("certificate", stage_certificate)
    run_stage("emit", stage_emit)
    return report


def _scenario_payload(scn: Scenario) -> dict:
    return {
        "name": scn.name,
        "potential": scn.potential.spec_record or {"kind": scn.potential.name},
        "p": scn.p,
        "v": scn.v,
        "horizon": scn.horizon,
        "eps0": scn.eps0,
        "ratio": scn.ratio,
        "count": scn.count,
        "integrator": scn.options.method,
        "step_factor": scn.options.step_factor,
        "n_out": scn.options.n_out,
        "slack": scn.slack,
    }


def _figures(out_dir: str, scn: Scenario, state: dict) -> List[str]:
    fig_dir = os.path.join(out_dir, "figures")
    os.makedirs(fig_dir, exist_ok=True)
    written = []
    fam = state.get("family")
    if fam is None:
        return written
    series = [{"x": m.x[:, 0], "y": m.x[:, 1], "label": f"eps={fam.epsilons[j]:.4g}"}
              for j, m in enumerate(fam.members)]
    if "limit" in state:
        series.append({"x": state["limit"].x[:, 0], "y": state["limit"].x[:, 1],
                       "label": "limit", "color": "#000000"})
    name = os.path.join(fig_dir, "trajectories.svg")
    line_plot(name, series, title=f"{scn.name}: rescaled trajectories",
              xlabel="x0", ylabel="x1")
    written.append(name)
    if "convergence" in state:
        conv = state["convergence"]
        name = os.path.join(fig_dir, "convergence.svg")
        line_plot(name, [{"x": np.arange(len(conv.distances)), "y": conv.distances,
                          "label": "sup distance", "marker": True}],
                  title=f"{scn.name}: consecutive-member distances",
                  xlabel="pair index j", ylabel="log10 sup distance", logy=True)
        written.append(name)
        bound = [scn.potential.profile.inverse(0.5 * e * e * float(np.linalg.norm(scn.v)) ** 2)
                 for e in fam.epsilons] if scn.potential.profile.inverse else None
        series = [{"x": fam.epsilons, "y": conv.violation_max, "label": "max |f|",
                   "marker": True}]
        if bound is not None:
            series.append({"x": fam.epsilons, "y": bound, "label": "budget bound"})
        name = os.path.join(fig_dir, "violation.svg")
        line_plot(name, series, title=f"{scn.name}: floor violation vs eps",
                  xlabel="log10 eps", ylabel="log10 max |f|", logx=True, logy=True)
        written.append(name)
    return written


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _scenario_from_args(args) -> Scenario:
    overrides = {
        "eps0": args.eps0,
        "ratio": args.ratio,
        "count": args.count,
        "horizon": args.horizon,
        "step_factor": args.step_factor,
    }
    return parse_scenario(args.scenario, overrides)


def _out_dir(args, scn: Scenario) -> str:
    if args.out:
        return args.out
    try:
        with open(args.scenario, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        if isinstance(raw, dict) and raw.get("out"):
            return str(raw["out"])
    except (OSError, json.JSONDecodeError):
        pass
    return f"out_{scn.name}"


def _cmd_simulate(args) -> int:
    scn = _scenario_from_args(args)
    eps = args.eps if args.eps is not None else scn.eps0
    traj = integrate_rescaled(scn.potential, scn.p, scn.v, eps, scn.horizon, scn.options)
    audit = energy_audit(traj, scn.potential)
    bounds = confinement_check(traj, scn.potential, scn.v, scn.slack)
    out = _out_dir(args, scn)
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "traj_eps0.csv")
    write_trajectory_csv(path, traj, audit.values)
    print(f"eps = {eps:g}:")
    print(f"  energy drift     = {audit.drift:.3e}")
    print(f"  max speed        = {bounds.max_speed:.9f} (bound {bounds.v_norm * (1 + scn.slack):.9f})")
    print(f"  max potential    = {bounds.max_potential:.3e}")
    print(f"  confinement pass = {bounds.passed}")
    print(f"  wrote {path}")
    return 0


def _cmd_family(args) -> int:
    scn = _scenario_from_args(args)
    fam = run_family(scn, jobs=args.jobs)
    out = _out_dir(args, scn)
    os.makedirs(out, exist_ok=True)
    for j in range(fam.count):
        write_trajectory_csv(os.path.join(out, f"traj_eps{j}.csv"),
                             fam.members[j], fam.energies[j].values)
    print(f"{'j':>2} {'eps':>10} {'drift':>10} {'max|xd|':>12} {'maxU':>12} {'pass':>5}")
    for j in range(fam.count):
        b, e = fam.bounds[j], fam.energies[j]
        print(f"{j:>2} {fam.epsilons[j]:>10.4g} {e.drift:>10.2e} "
              f"{b.max_speed:>12.9f} {b.max_potential:>12.4e} {str(b.passed):>5}")
    print(f"wrote {fam.count} trajectory files to {out}")
    return 0 if all(b.passed for b in fam.bounds) else 2


def _cmd_limit(args) -> int:
    scn = _scenario_from_args(args)
    fam = run_family(scn, jobs=args.jobs)
    limit, conv = extract_limit(fam)
    out = _out_dir(args, scn)
    os.makedirs(out, exist_ok=True)
    write_limit_csv(os.path.join(out, "limit.csv"), limit)
    payload = {"scenario": _scenario_payload(scn),
               "convergence": convergence_payload(conv, limit)}
    write_report_json(os.path.join(out, "report.json"), payload)
    print("consecutive sup distances:", ", ".join(f"{d:.3e}" for d in conv.distances))
    print(f"cauchy_ok = {conv.cauchy_ok} (tol {conv.tol_limit:.3e})")
    print(f"|xdot(0) - v| = {limit.initial_velocity_error:.3e}")
    return 0 if conv.cauchy_ok else 2


def _cmd_certify(args) -> int:
    scn = _scenario_from_args(args)
    out = _out_dir(args, scn)
    report = run_pipeline(scn, out, jobs=args.jobs, svg=args.svg)
    for st in report.stages:
        print(f"stage {st['name']:<12} {st['status']:<14} {st['seconds']:.2f}s")
    print(f"verdict: {report.verdict}" + (f" ({report.reason})" if report.reason else ""))
    print(f"artifacts in {report.out_dir}")
    return report.exit_code


def _cmd_residual(args) -> int:
    scn = _scenario_from_args(args)
    eps = float(scn.epsilons[args.member])
    traj = integrate_rescaled(scn.potential, scn.p, scn.v, eps, scn.horizon, scn.options)
    chart = chart_for_scenario(scn)
    taus = np.linspace(-0.85 * scn.horizon, 0.85 * scn.horizon, args.samples)
    result = residual_convergence(chart, traj, taus)
    print(f"member j={args.member} (eps={eps:g}), {args.samples} interior samples")
    print(f"  max residual        = {result['coarse_max']:.3e}")
    print(f"  max at halved steps = {result['fine_max']:.3e}")
    print(f"  shrink factor       = {result['shrink_factor']:.2f}")
    return 0


def _cmd_check(args) -> int:
    scn = _scenario_from_args(args)
    P = scn.potential
    fld = P.field
    rng = np.random.default_rng(20240611)
    failures = 0

    def verdict(name, ok, detail):
        nonlocal failures
        failures += 0 if ok else 1
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")

    scale = 1.0 + float(np.linalg.norm(scn.p))
    pts = scn.p + rng.uniform(-0.5 * scale, 0.5 * scale, size=(50, fld.dim))
    worst = max(fd_gradient_check(P, x) for x in pts)
    verdict("gradient-vs-central-differences", worst <= 1e-6, f"max discrepancy {worst:.2e}")

    pts = scn.p + rng.uniform(-scale, scale, size=(10000, fld.dim))
    umin = float(P.value_many(pts).min())
    verdict("potential-nonnegative", umin >= 0.0, f"min U = {umin:.2e}")

    vnorm = float(np.linalg.norm(scn.v))
    r_box = 2.0 * P.profile.inverse(0.5 * scn.eps0 ** 2 * vnorm ** 2)
    chart = chart_for_scenario(scn)
    worst_flow = 0.0
    worst_sep = 0.0
    worst_round = 0.0
    for _ in range(200):
        y = rng.uniform(-0.4, 0.4, size=fld.dim - 1) * scn.horizon * vnorm
        r = float(rng.uniform(-r_box, r_box))
        t = float(rng.uniform(-0.3, 0.3))
        x = chart.tube_point(r, y)
        worst_flow = max(worst_flow, flow_identity_residual(fld, x, t))
        worst_sep = max(worst_sep, abs(P.value(x) - P.profile.value(r)))
        rc = chart.coords_of(x)
        back = chart.tube_point(rc.r, rc.y)
        worst_round = max(worst_round, float(np.linalg.norm(back - x)))
    verdict("flow-identity", worst_flow <= 1e-9, f"max residual {worst_flow:.2e}")
    verdict("potential-separation", worst_sep <= 1e-9, f"max |U - g(r)| {worst_sep:.2e}")
    verdict("tube-roundtrip", worst_round <= 1e-8, f"max roundtrip {worst_round:.2e}")

    seeds = scn.p + rng.uniform(-0.2 * scale, 0.2 * scale, size=(20, fld.dim))
    reg = check_regular_value(fld, seeds, tol=1e-3)
    verdict("regular-value", reg.passed, f"min |grad f| on floor = {reg.min_grad_norm:.3g}")
    return 0 if failures == 0 else 2


def _cmd_gallery(args) -> int:
    potential = gallery_lookup(args.name, {})
    if potential.dim == 1:
        barrier = locate_barrier(potential, window=args.window)
        rep = trapped_motion_check(potential, barrier, n_traj=args.trajectories,
                                   t_end=args.horizon,
                                   energy_fraction=args.energy_fraction)
    else:
        probe = gallery_lookup("painleve", {})
        barrier = locate_barrier(probe, window=args.window)
        # the second coordinate runs away exponentially: keep the horizon short
        rep = projection_trap_check(potential, barrier, n_traj=args.trajectories,
                                    t_end=min(args.horizon, 12.0),
                                    energy_fraction=args.energy_fraction)
    b = rep.barrier
    print(f"{args.name}: barrier height {b.height:.6e} at [{b.x_left:.6f}, {b.x_right:.6f}]")
    for r in rep.records:
        print(f"  x0={r.x0:+.4f} v0={r.v0:.5f} E={r.energy:.3e} "
              f"max|x|={r.max_excursion:.6f} trapped={r.trapped}")
    print(f"all trapped over t in [0, {rep.t_end:g}]: {rep.all_trapped}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        payload = {
            "name": args.name,
            "barrier": {"x_left": b.x_left, "x_right": b.x_right, "height": b.height},
            "t_end": rep.t_end,
            "records": [vars(r) for r in rep.records],
            "all_trapped": rep.all_trapped,
        }
        write_report_json(os.path.join(args.out, "gallery_report.json"), payload)
    return 0 if rep.all_trapped else 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="flatvalley",
        description="Escape-from-a-flat-valley laboratory: rescaled dynamics, "
                    "limit curves, and instability certificates.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True, help="scenario JSON file")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="family worker processes")
    common.add_argument("--eps0", type=float, default=None)
    common.add_argument("--ratio", type=float, default=None)
    common.add_argument("--count", type=int, default=None)
    common.add_argument("--horizon", type=float, default=None)
    common.add_argument("--step-factor", dest="step_factor", type=float, default=None)
    common.add_argument("--svg", action=argparse.BooleanOptionalAction, default=True)

    p = sub.add_parser("simulate", parents=[common], help="single rescaled run")
    p.add_argument("--eps", type=float, default=None)
    p.set_defaults(fn=_cmd_simulate)
    sub.add_parser("family", parents=[common], help="run the eps family").set_defaults(fn=_cmd_family)
    sub.add_parser("limit", parents=[common], help="family plus limit extraction").set_defaults(fn=_cmd_limit)
    sub.add_parser("certify", parents=[common], help="full pipeline").set_defaults(fn=_cmd_certify)
    p = sub.add_parser("residual", parents=[common],
                       help="tangential equation-of-motion residual")
    p.add_argument("--member", type=int, default=1)
    p.add_argument("--samples", type=int, default=20)
    p.set_defaults(fn=_cmd_residual)
    sub.add_parser("check", parents=[common],
                   help="field and flow property suite").set_defaults(fn=_cmd_check)
    p = sub.add_parser("gallery", help="stability-contrast demos (trapped orbits)")
    p.add_argument("--name", default="painleve", choices=["painleve", "laloy"])
    p.add_argument("--window", type=float, default=0.25)
    p.add_argument("--trajectories", type=int, default=10)
    p.add_argument("--horizon", type=float, default=1000.0)
    p.add_argument("--energy-fraction", dest="energy_fraction", type=float, default=0.5)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_gallery)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except FlatValleyError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
