import json
import math

import numpy as np
import pytest

from triplewell.classical import ClassicalState, _rhs_real, classical_energy
from triplewell.model import ModelParams
from triplewell.sections import (
    BOTH,
    CANONICAL,
    CARTESIAN,
    NEGATIVE,
    POSITIVE,
    SectionSpec,
    coordinate,
    energy_range,
    energy_shell_seed,
    flow,
    poincare_section,
)

VORTEX = complex(-0.5, math.sqrt(3) / 2)
SQ5, SQ15 = math.sqrt(5), math.sqrt(15)
VORTEX_SPEC = SectionSpec(CARTESIAN, ("p2", -SQ15), BOTH, ("q1", "p1"))
SDW_SPEC = SectionSpec(CANONICAL, ("phi2", 0.0), BOTH, ("K1", "phi1"))


def test_vortex_cartesian_coordinates():
    y = ClassicalState(VORTEX, VORTEX.conjugate()).as_array()
    vals = [coordinate(y, k, 30) for k in ("q1", "p1", "q2", "p2")]
    assert np.allclose(vals, [-SQ5, SQ15, -SQ5, -SQ15])
    y = ClassicalState(-1.0, 0.0).as_array()
    assert coordinate(y, "K1", 30) == pytest.approx(15.0)
    assert coordinate(y, "phi1", 30) == pytest.approx(math.pi)


def test_seed_at_sdws_is_on_its_own_shell():
    p = ModelParams(-1.0, 30, 5.0, 0.05)
    sdw = ClassicalState(-1.0, 0.0)
    e = classical_energy(sdw, p)
    res = energy_shell_seed(p, e, CANONICAL, {"K1": 15.0, "phi1": math.pi, "phi2": 0.0})
    assert res.in_range
    k2 = [coordinate(s.as_array(), "K2", 30) for s in res.seeds]
    assert min(k2) == 0.0
    assert abs(classical_energy(res.seeds[int(np.argmin(k2))], p) - e) == 0.0


def test_shell_outside_energy_range_is_empty():
    p = ModelParams(-1.0, 30, 5.0, 0.05)
    lo, hi = energy_range(p)
    res = energy_shell_seed(p, hi + 10 * (hi - lo), CANONICAL, {"K1": 10.0, "phi1": 0.0, "phi2": 0.0})
    assert not res.in_range and res.seeds == []


def test_shell_seeds_hit_target_energy():
    p = ModelParams(-1.0, 30, 5.0, 0.05)
    e = classical_energy(ClassicalState(-1.0, 0.0), p)
    res = energy_shell_seed(p, e, CANONICAL, {"phi2": 0.0, "K1": [9.0, 13.0, 17.0, 21.0], "phi1": [math.pi]})
    assert len(res.seeds) >= 4
    for s in res.seeds:
        assert abs(classical_energy(s, p) - e) < 1e-10
    picked = energy_shell_seed(p, e, CANONICAL, {"phi2": 0.0, "K1": [9.0, 13.0, 17.0, 21.0], "phi1": [math.pi]},
                               n_seeds=2)
    assert len(picked.seeds) == 2
    with pytest.raises(ValueError):
        energy_shell_seed(p, e, CANONICAL, {"phi2": 0.0, "K1": 9.0})


def test_stable_fixed_point_clusters_on_section():
    p = ModelParams(-1.0, 30, -1.0, -0.01)
    centre = np.array([-SQ5, SQ15])
    res = poincare_section([ClassicalState(VORTEX, VORTEX.conjugate())], p, VORTEX_SPEC, 20.0)
    for q in res.points:
        assert np.abs(np.array([q.axis1, q.axis2]) - centre).max() < 1e-8
    for eps in (1e-3, 1e-2):
        res = poincare_section([ClassicalState(VORTEX * (1 + eps), VORTEX.conjugate())], p, VORTEX_SPEC, 60.0)
        pts = np.array([(q.axis1, q.axis2) for q in res.points])
        assert len(pts) > 10
        assert np.abs(pts - centre).max() < 5 * eps


def test_crossings_satisfy_condition_and_conserve_energy():
    p = ModelParams(-1.0, 30, -5.0, -0.05)
    e = classical_energy(ClassicalState(-1.0, 0.0), p)
    seeds = energy_shell_seed(p, e, CANONICAL, {"phi2": 0.0, "K1": [11.0, 19.0], "phi1": [math.pi]}).seeds
    res = poincare_section(seeds, p, SDW_SPEC, 60.0)
    assert res.points and res.max_residual < 1e-10
    for q in res.points:
        assert abs(q.energy - e) < 1e-7
        assert 0.0 <= q.axis2 < 2 * math.pi
    times = [(q.trajectory_id, q.t) for q in res.points]
    assert times == sorted(times)


@pytest.mark.parametrize("direction,sign", [(POSITIVE, 1), (NEGATIVE, -1)])
def test_direction_filter(direction, sign):
    p = ModelParams(-1.0, 30, -1.0, -0.01)
    spec = SectionSpec(CARTESIAN, ("p2", -SQ15), direction, ("q1", "q2"))
    seed = ClassicalState(VORTEX * 1.05, VORTEX.conjugate())
    both = poincare_section([seed], p, SectionSpec(CARTESIAN, ("p2", -SQ15), BOTH, ("q1", "q2")), 40.0)
    res = poincare_section([seed], p, spec, 40.0)
    assert 0 < len(res.points) < len(both.points)
    for q in res.points:
        y = flow(seed.as_array(), p, q.t)
        f = np.array(_rhs_real(0.0, y, p.chi, p.mu, p.omega))
        h = 1e-6
        rate = (coordinate(y + h * f, "p2", 30) - coordinate(y - h * f, "p2", 30)) / (2 * h)
        assert np.sign(rate) == sign


def test_backward_flow_recovers_previous_crossing():
    p = ModelParams(-1.0, 30, -5.0, -0.05)
    e = classical_energy(ClassicalState(-1.0, 0.0), p)
    seed = energy_shell_seed(p, e, CANONICAL, {"phi2": 0.0, "K1": [19.0], "phi1": [math.pi]}).seeds[0]
    pts = poincare_section([seed], p, SDW_SPEC, 40.0).points
    assert len(pts) >= 4
    y = seed.as_array()
    states = []
    t_prev = 0.0
    for q in pts:
        y = flow(y, p, q.t - t_prev)
        t_prev = q.t
        states.append(y)
    for k in range(1, len(states)):
        back = flow(states[k], p, pts[k - 1].t - pts[k].t)
        for name, want in (("K1", pts[k - 1].axis1), ("phi1", pts[k - 1].axis2)):
            got = coordinate(back, name, 30)
            diff = abs(got - want)
            if name == "phi1":
                diff = min(diff, 2 * math.pi - diff)
            assert diff < 1e-6


def test_section_spec_validation():
    with pytest.raises(ValueError):
        SectionSpec("polar", ("phi2", 0.0))
    with pytest.raises(ValueError):
        SectionSpec(CANONICAL, ("q1", 0.0))
    with pytest.raises(ValueError):
        SectionSpec(CANONICAL, ("K1", 15.0), BOTH, ("K1", "phi1"))
    with pytest.raises(ValueError):
        SectionSpec(CANONICAL, ("phi2", 0.0), "sideways")


def test_seeds_must_share_a_shell():
    p = ModelParams(-1.0, 30, -1.0, -0.01)
    with pytest.raises(ValueError):
        poincare_section([ClassicalState(0.1, 0.2), ClassicalState(0.5, 0.2)], p, VORTEX_SPEC, 5.0)
    assert poincare_section([], p, VORTEX_SPEC, 5.0).points == []


def test_section_csv_and_metadata(tmp_path):
    p = ModelParams(-1.0, 30, -1.0, -0.01)
    res = poincare_section([ClassicalState(VORTEX * 1.01, VORTEX.conjugate())], p, VORTEX_SPEC, 20.0)
    res.to_csv(tmp_path / "s.csv", p, tmp_path / "s.json")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "trajectory_id,t,axis1,axis2,energy"
    assert len(lines) == len(res.points) + 1
    meta = json.loads((tmp_path / "s.json").read_text())
    assert meta["spec"]["condition"][0] == "p2"
    assert meta["params"]["chi"] == -1.0
