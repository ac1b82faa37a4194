import json
import os

import numpy as np
import pytest

import flatvalley as fv
from flatvalley import cli
from flatvalley.errors import ScenarioError, UnverifiedLimitError
from flatvalley.reporting import read_csv_columns, revalidate_from_dir


def _write(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


BASE = {
    "potential": {"kind": "ellipsoid"},
    "p": [1.0, 0.0, 0.0],
    "v": [0.0, 1.0, 0.0],
    "horizon": 0.5,
}


def test_parse_scenario_valid(tmp_path):
    scn = fv.parse_scenario(_write(tmp_path, "ok.json", BASE))
    assert scn.potential.dim == 3
    assert scn.eps0 == 0.1 and scn.count == 6
    assert np.allclose(scn.p, [1.0, 0.0, 0.0])


def test_parse_scenario_snaps_p(tmp_path):
    data = dict(BASE, p=[1.000001, 0.0, 0.0])
    scn = fv.parse_scenario(_write(tmp_path, "snap.json", data))
    assert abs(scn.potential.field.value(scn.p)) <= 1e-12


def test_parse_scenario_rejects_far_p(tmp_path):
    data = dict(BASE, p=[1.1, 0.0, 0.0])
    with pytest.raises(ScenarioError):
        fv.parse_scenario(_write(tmp_path, "far.json", data))


def test_parse_scenario_rejects_normal_velocity(tmp_path):
    data = dict(BASE, v=[1.0, 0.0, 0.0])
    with pytest.raises(ScenarioError, match="tangent"):
        fv.parse_scenario(_write(tmp_path, "vbad.json", data))


def test_parse_scenario_projects_slightly_off_velocity(tmp_path):
    data = dict(BASE, v=[1e-4, 1.0, 0.0])
    scn = fv.parse_scenario(_write(tmp_path, "vproj.json", data))
    g = scn.potential.field.gradient(scn.p)
    assert abs(g @ scn.v) <= 1e-12 * np.linalg.norm(g) * np.linalg.norm(scn.v) + 1e-15


def test_parse_scenario_unknown_field(tmp_path):
    data = dict(BASE, wobble=3)
    with pytest.raises(ScenarioError, match="wobble"):
        fv.parse_scenario(_write(tmp_path, "unk.json", data))


def test_parse_scenario_syntax_error_has_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "potential": {"kind": "circle"},\n  oops\n}\n')
    with pytest.raises(ScenarioError, match="line 3"):
        fv.parse_scenario(str(path))


def test_parse_scenario_rejects_plain_potential(tmp_path):
    data = {"potential": {"kind": "painleve"}, "p": [0.0], "v": [1.0]}
    with pytest.raises(ScenarioError, match="gallery"):
        fv.parse_scenario(_write(tmp_path, "plain.json", data))


def test_overrides_take_precedence(tmp_path):
    path = _write(tmp_path, "ov.json", BASE)
    scn = fv.parse_scenario(path, {"count": 4, "eps0": 0.2, "horizon": None})
    assert scn.count == 4 and scn.eps0 == 0.2 and scn.horizon == 0.5


def test_pipeline_artifacts_and_exit(circle_run_dir):
    run = circle_run_dir.report
    assert run.verdict == "UNSTABLE"
    assert run.exit_code == 0
    names = {os.path.basename(m) for m in run.manifest}
    for j in range(6):
        assert f"traj_eps{j}.csv" in names
        assert f"coords_eps{j}.csv" in names
    assert "limit.csv" in names and "report.json" in names
    for fig in ("trajectories.svg", "convergence.svg", "violation.svg"):
        assert os.path.exists(os.path.join(circle_run_dir.path, "figures", fig))
    stages = {s["name"]: s["status"] for s in run.stages}
    assert all(v == "ok" for v in stages.values())


def test_report_json_content(circle_run_dir):
    with open(os.path.join(circle_run_dir.path, "report.json")) as fh:
        rep = json.load(fh)
    assert rep["certificate"]["verdict"] == "UNSTABLE"
    assert rep["certificate"]["revalidated_in_memory"] is True
    assert rep["convergence"]["cauchy_ok"] is True
    assert len(rep["family"]["epsilons"]) == 6
    assert all(d <= 1e-8 for d in rep["family"]["energy_drifts"])


def test_trajectory_csv_roundtrip(circle_run_dir):
    cols = read_csv_columns(os.path.join(circle_run_dir.path, "traj_eps0.csv"))
    assert list(cols) == ["tau", "x0", "x1", "v0", "v1", "H"]
    assert len(cols["tau"]) == 401
    # 17 significant digits round-trip float64 exactly
    assert cols["tau"][200] == 0.0
    assert cols["x0"][200] == 1.0
    assert cols["H"][200] == pytest.approx(0.5, abs=1e-14)


def test_file_revalidation(circle_run_dir):
    result = revalidate_from_dir(circle_run_dir.path)
    assert result["ok"], result


def test_file_revalidation_detects_tampering(circle_run_dir, tmp_path):
    import shutil

    clone = tmp_path / "tampered"
    shutil.copytree(circle_run_dir.path, clone)
    with open(clone / "report.json") as fh:
        rep = json.load(fh)
    rep["certificate"]["escape_radius"] *= 1.05
    with open(clone / "report.json", "w") as fh:
        json.dump(rep, fh)
    assert not revalidate_from_dir(str(clone))["ok"]


def test_pipeline_determinism(tiny_scenario_file, tmp_path):
    scn = fv.parse_scenario(tiny_scenario_file)
    a, b = tmp_path / "a", tmp_path / "b"
    fv.run_pipeline(scn, str(a), svg=True)
    fv.run_pipeline(scn, str(b), svg=True)
    for root, _, files in os.walk(a):
        for name in files:
            pa = os.path.join(root, name)
            pb = pa.replace(str(a), str(b), 1)
            with open(pa, "rb") as fa, open(pb, "rb") as fb:
                assert fa.read() == fb.read(), f"{name} differs between runs"


def test_pipeline_indeterminate_exit(tiny_scenario_file, tmp_path, monkeypatch):
    def refuse(*args, **kwargs):
        raise UnverifiedLimitError("forced for the exit-code contract test")

    monkeypatch.setattr(cli, "certify_instability", refuse)
    scn = fv.parse_scenario(tiny_scenario_file)
    report = fv.run_pipeline(scn, str(tmp_path / "ind"), svg=False)
    assert report.verdict == "INDETERMINATE"
    assert report.exit_code == 2


def test_main_certify_exit_code(tiny_scenario_file, tmp_path, capsys):
    out = str(tmp_path / "run")
    code = cli.main(["certify", "--scenario", tiny_scenario_file, "--out", out,
                     "--no-svg"])
    assert code == 0
    assert "UNSTABLE" in capsys.readouterr().out


def test_main_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code = cli.main(["certify", "--scenario", str(bad)])
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_main_simulate_family_limit(tiny_scenario_file, tmp_path, capsys):
    out = str(tmp_path / "sim")
    assert cli.main(["simulate", "--scenario", tiny_scenario_file, "--out", out]) == 0
    assert os.path.exists(os.path.join(out, "traj_eps0.csv"))
    assert cli.main(["family", "--scenario", tiny_scenario_file, "--out", out]) == 0
    assert cli.main(["limit", "--scenario", tiny_scenario_file, "--out", out]) == 0
    assert os.path.exists(os.path.join(out, "limit.csv"))
    capsys.readouterr()


def test_main_gallery(capsys):
    code = cli.main(["gallery", "--name", "painleve", "--trajectories", "3",
                     "--horizon", "30"])
    assert code == 0
    assert "trapped=True" in capsys.readouterr().out


def test_main_check(tiny_scenario_file, capsys):
    assert cli.main(["check", "--scenario", tiny_scenario_file]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out


def test_family_jobs_worker_path(tiny_scenario_file):
    scn = fv.parse_scenario(tiny_scenario_file)
    seq = fv.run_family(scn, jobs=1)
    par = fv.run_family(scn, jobs=2)
    for a, b in zip(seq.members, par.members):
        assert np.array_equal(a.x, b.x)
        assert np.array_equal(a.v, b.v)
