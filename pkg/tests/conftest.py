import json
from types import SimpleNamespace

import numpy as np
import pytest

import flatvalley as fv


def _pipeline_bundle(scn):
    """Run every analysis stage once; tests pick the pieces they assert on."""
    fam = fv.run_family(scn)
    chart = fv.chart_for_scenario(scn)
    traces = fv.coordinate_traces(chart, fam)
    metric = fv.metric_min_for_traces(chart, traces)
    coord_bounds = fv.coordinate_bounds_report(traces, scn.potential, scn.v, metric, scn.slack)
    acceleration = fv.acceleration_uniformity(traces)
    limit, convergence = fv.extract_limit(fam)
    c = (len(limit.tau) - 1) // 2
    dist = np.linalg.norm(limit.x[c:] - scn.p, axis=1)
    tau_star = float(limit.tau[c + int(np.argmax(dist))])
    runs = fv.physical_evidence_runs(scn.potential, scn.p, scn.v, fam.epsilons,
                                     tau_star, scn.options)
    cert = fv.certify_instability(fam, limit, runs)
    return SimpleNamespace(
        scenario=scn, family=fam, chart=chart, traces=traces, metric=metric,
        coord_bounds=coord_bounds, acceleration=acceleration, limit=limit,
        convergence=convergence, tau_star=tau_star, physical_runs=runs,
        certificate=cert)


@pytest.fixture(scope="session")
def circle_bundle():
    scn = fv.Scenario(fv.circle(), [1.0, 0.0], [0.0, 1.0], 1.0, name="circle")
    return _pipeline_bundle(scn)


@pytest.fixture(scope="session")
def gutter_bundle():
    scn = fv.Scenario(fv.gutter(), [0.0, 0.0], [0.0, 1.0], 1.0, name="gutter")
    return _pipeline_bundle(scn)


@pytest.fixture(scope="session")
def ellipsoid_bundle():
    scn = fv.Scenario(fv.ellipsoid(), [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], 0.5,
                      name="ellipsoid")
    return _pipeline_bundle(scn)


@pytest.fixture(scope="session")
def ellipsoid_reference():
    """Brute-force small-eps rescaled run projected to the floor."""
    E = fv.ellipsoid()
    traj = fv.integrate_rescaled(E, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], 1e-3, 0.5)
    x_proj = np.array([fv.foot_point(E.field, x) for x in traj.x])
    return SimpleNamespace(trajectory=traj, x=x_proj, tau=traj.tau)


@pytest.fixture(scope="session")
def circle_run_dir(tmp_path_factory):
    """Full pipeline with artifact emission, shared by CLI and certificate tests."""
    out = tmp_path_factory.mktemp("circle_pipeline")
    scn = fv.Scenario(fv.circle(), [1.0, 0.0], [0.0, 1.0], 1.0, name="circle")
    report = fv.run_pipeline(scn, str(out), svg=True)
    assert report.exit_code == 0, report.reason
    return SimpleNamespace(path=str(out), report=report)


@pytest.fixture()
def tiny_scenario_file(tmp_path):
    """A fast 3-member circle scenario for CLI plumbing tests."""
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps({
        "potential": {"kind": "circle", "exponent": 2},
        "p": [1.0, 0.0],
        "v": [0.0, 1.0],
        "horizon": 0.5,
        "eps0": 0.1,
        "ratio": 0.5,
        "count": 3,
        "n_out": 101,
    }))
    return str(path)
