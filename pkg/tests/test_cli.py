import json
import math

import numpy as np
import pytest

from triplewell.cli import EXIT_USAGE, main
from triplewell.presets import PRESETS, get_preset


def _run(args, out):
    return main(list(args) + ["--out", str(out)])


def _csv(path):
    return np.genfromtxt(path, delimiter=",", names=True, dtype=None, encoding=None)


def _fixed_points(out, chi, mu=0.0):
    assert _run(["fixed-points", "--chi", str(chi), "--mu", str(mu)], out) == 0
    lines = (out / "fixed_points.csv").read_text().splitlines()
    header = lines[0].split(",")
    return [dict(zip(header, ln.split(","))) for ln in lines[1:]]


def test_fixed_points_counts_and_values(tmp_path):
    assert len(_fixed_points(tmp_path / "a", 1.5)) == 6
    rows = {r["class"]: r for r in _fixed_points(tmp_path / "b", 3.0)}
    assert len(rows) == 8
    assert rows["S1"]["verdict"] == "unstable" and rows["S1"]["stability"] == "0"
    assert rows["S2"]["lambda_source"] == "numeric"
    rows = {r["class"]: r for r in _fixed_points(tmp_path / "c", 0.0)}
    assert complex(rows["S1"]["lambda_squared"]) == pytest.approx(-9.0)
    assert rows["S1"]["lambda_source"] == "closed"


def test_params_command(tmp_path, capsys):
    assert _run(["params", "--kappa", str(-4 / 29), "--lam", "0.0"], tmp_path) == 0
    report = dict(ln.split(" = ") for ln in capsys.readouterr().out.splitlines() if " = " in ln)
    assert float(report["chi"]) == pytest.approx(4.0)
    assert float(report["mu"]) == 0.0
    assert (tmp_path / "params.cfg").exists()


def test_usage_errors(tmp_path):
    cases = [
        ["stability-map", "--chi-range", "0", "1", "1", "--mu-range", "0", "1", "3"],
        ["evolve", "--mode", "quantum", "--n", "300", "--t-end", "1"],
        ["evolve", "--mode", "classical", "--fock", "30", "0", "0", "--t-end", "1"],
        ["sphere-portrait", "--seed", "0.2", "0.4", "--t-end", "1"],
        ["evolve", "--preset", "fig6a"],
        ["evolve", "--preset", "nonexistent"],
        ["poincare"],
    ]
    for i, args in enumerate(cases):
        assert _run(args, tmp_path / str(i)) == EXIT_USAGE, args


def test_config_round_trip_reproduces_outputs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["evolve", "--chi", "2", "--mu", "0.1", "--w", "0.3", "(-0.2+0.1j)", "--mode", "both",
            "--n", "8", "--t-end", "3", "--sample-dt", "0.5"]
    assert _run(args, a) == 0
    assert _run(["evolve", "--config", str(a / "config.json")], b) == 0
    for name in ("config.json", "evolve_classical.csv", "evolve_quantum.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    meta = json.loads((a / "metadata.json").read_text())
    assert meta["outputs"] == ["evolve_classical.csv", "evolve_quantum.csv"]
    assert _run(["fixed-points", "--config", str(a / "config.json")], tmp_path / "c") == EXIT_USAGE


def test_presets_match_figure_parameters():
    captions = {
        "fig3a": [(1.5, 0.0)], "fig3b": [(1.98, 0.0)], "fig3c": [(3.0, 0.0)],
        "fig4": [(4.0, 0.04), (4.0, 0.4)], "fig5": [(4.0, 0.04), (4.0, 0.4)],
        "fig6a": [(5.0, 0.05)], "fig6b": [(-5.0, -0.05)],
        "fig9a": [(-1.0, -0.01)], "fig9b": [(-5.0, -0.05)],
    }
    for name, entry in PRESETS.items():
        for run in entry["runs"]:
            assert run["params"]["n"] == 30 and abs(run["params"]["omega"]) == 1.0
        if name in captions:
            got = [(r["params"]["chi"], r["params"]["mu"]) for r in entry["runs"]]
            assert got == captions[name]
    fig10 = get_preset("fig10")
    assert [r["label"] for r in fig10["runs"]] == ["regular", "chaotic"]
    fig10["runs"].clear()
    assert len(PRESETS["fig10"]["runs"]) == 2


def test_linear_evolve_modes_agree(tmp_path):
    args = ["evolve", "--mode", "both", "--w", "0.5-0.2j", "-1.1", "--t-end", "10", "--sample-dt", "0.5"]
    assert _run(args, tmp_path) == 0
    c = _csv(tmp_path / "evolve_classical.csv")
    q = _csv(tmp_path / "evolve_quantum.csv")
    w1 = c["re_w1"] + 1j * c["im_w1"]
    w2 = c["re_w2"] + 1j * c["im_w2"]
    s = 1 + abs(w1) ** 2 + abs(w2) ** 2
    iz_classical = (abs(w1) ** 2 + abs(w2) ** 2 - 1) / s
    assert np.abs(iz_classical - q["iz"]).max() < 1e-6
    assert np.abs(q["purity"] - 1).max() < 1e-8


def _sphere(tmp_path, preset):
    assert _run(["sphere-portrait", "--preset", preset, "--t-end", "20"], tmp_path) == 0
    label = get_preset(preset)["runs"][0]["label"]
    return _csv(tmp_path / f"{label}_sphere.csv"), _csv(tmp_path / f"{label}_markers.csv")


def test_sphere_portrait_orbits_wind_around_s1(tmp_path):
    traj, markers = _sphere(tmp_path, "fig3a")
    s1 = markers[markers["class"] == "S1"][0]
    axis = np.array([s1["Ix"], s1["Iy"], s1["Iz"]])
    assert s1["verdict"] == "stable"
    pts = np.stack([traj["Ix"], traj["Iy"], traj["Iz"]], axis=1)
    dist = np.linalg.norm(pts - axis, axis=1)
    # trajectory starting closest to s1
    starts = traj["t"] == 0
    tid = traj["trajectory_id"][starts][np.argmin(dist[starts])]
    orbit = pts[traj["trajectory_id"] == tid]
    assert np.linalg.norm(orbit - axis, axis=1).max() < 0.2
    e1 = np.cross(axis, [0.0, 1.0, 0.0])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    ang = np.unwrap(np.arctan2((orbit - axis) @ e2, (orbit - axis) @ e1))
    assert abs(ang[-1] - ang[0]) > 2 * math.pi
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-8)


def test_sphere_portrait_s1_unstable_above_threshold(tmp_path):
    _, markers = _sphere(tmp_path, "fig3c")
    verdicts = dict(zip(markers["class"], markers["verdict"]))
    assert verdicts["S1"] == "unstable" and verdicts["S4"] == "stable"


def test_sphere_portrait_has_trapped_and_oscillating_orbits(tmp_path):
    traj, markers = _sphere(tmp_path, "fig3b")
    assert {"S3", "S4"} <= set(markers["class"])
    kinds = set()
    for tid in np.unique(traj["trajectory_id"]):
        iz = traj["Iz"][traj["trajectory_id"] == tid]
        kinds.add("JO" if iz.min() < 0 < iz.max() else "MST")
    assert kinds == {"JO", "MST"}
