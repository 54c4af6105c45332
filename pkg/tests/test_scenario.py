import copy
import json
import math

import numpy as np
import pytest

from spherectl.errors import ScenarioValidationError
from spherectl.obstacle import nearest_obstacle
from spherectl.scenario import build_scenario, load_scenario

from conftest import raw_scenario


def _errors(data):
    with pytest.raises(ScenarioValidationError) as info:
        build_scenario(data)
    return info.value.errors


def test_shipped_reference_scenario(six_star):
    assert len(six_star.field) == 6
    assert (six_star.planner.k1, six_star.planner.kappa, six_star.planner.eps) == (1.0, 1.0, 0.13)
    c = six_star.controller
    assert (c.kd, c.eps1, c.eps2, c.separation) == (1.0, 0.087, 0.13, "spherical")
    assert (six_star.sim.h, six_star.sim.horizon) == (1e-3, 60.0)
    assert len(six_star.seeds()) == 10


def test_seed_velocities_point_at_closest_obstacle(six_star):
    for s in six_star.seeds():
        _, d, pi = nearest_obstacle(six_star.field, s.x)
        assert np.linalg.norm(s.v) == pytest.approx(1.0)
        assert abs(s.v @ s.x) < 1e-12
        # a short move along v reduces the distance at unit rate
        y = s.x + 1e-7 * s.v
        y /= np.linalg.norm(y)
        assert (nearest_obstacle(six_star.field, y)[1] - d) / 1e-7 == pytest.approx(-1.0, abs=1e-4)


def test_beta_ordering_violation_is_named():
    data = raw_scenario()
    data["controller"]["epsilon1"] = 0.13
    errs = _errors(data)
    assert any("beta schedule ordering" in e for e in errs)


def test_target_in_tube_is_named():
    data = raw_scenario()
    g = data["obstacles"][0]["kernel"]
    lat, lon = math.radians(g["lat_deg"] + 25), math.radians(g["lon_deg"])
    data["target"] = [math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat)]
    errs = _errors(data)
    assert any("target clearance" in e for e in errs)


def test_all_errors_reported_together():
    data = raw_scenario()
    data["controller"]["epsilon1"] = 0.2
    data["delta_u"] = 0.5
    data["separation"] = "taxicab"
    data["seeds"]["points"][0] = [0.819, 0.0, 0.574]  # inside obstacle 0
    errs = _errors(data)
    assert len(errs) >= 4
    text = " | ".join(errs)
    for fragment in ("beta schedule", "delta_u", "taxicab", "seeds.points[0]"):
        assert fragment in text


def test_obstacles_too_close():
    data = raw_scenario()
    data["obstacles"][1]["kernel"] = {"lat_deg": 35, "lon_deg": 50}
    errs = _errors(data)
    assert any("pairwise separation" in e for e in errs)


def test_attitude_block_checks():
    data = raw_scenario("s3_attitude")
    data["attitude"]["inertia"][0][1] = 0.3
    assert any("symmetric" in e for e in _errors(data))
    data = raw_scenario()
    data["attitude"] = {"inertia": np.eye(3).tolist()}
    assert any("dimension 3" in e for e in _errors(data))


def test_schema_version_and_dimension():
    data = raw_scenario()
    data["schema_version"] = 2
    assert any("schema_version" in e for e in _errors(data))
    data = raw_scenario()
    data["dimension"] = 0
    assert any("dimension" in e for e in _errors(data))


def test_parse_error_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "schema_version": 1,\n  "dimension": 2\n  "target": [0, 0, 1]\n}\n')
    with pytest.raises(ScenarioValidationError) as info:
        load_scenario(path)
    assert "line 4" in str(info.value)


def test_explicit_velocities_and_roundtrip(tmp_path):
    data = raw_scenario()
    n = len(data["seeds"]["points"])
    data["seeds"]["velocities"] = [[0.0, 0.0, 0.0]] * n
    path = tmp_path / "s.json"
    path.write_text(json.dumps(data))
    scen = load_scenario(path)
    assert np.all(scen.seed_velocities == 0.0)
    assert scen.name == "s2_six_star"


def test_random_seeds_are_free_and_bounded(six_star):
    seeds = six_star.random_seeds(200, seed=7)
    assert all(six_star.free(s.x) for s in seeds)
    assert max(np.linalg.norm(s.v) for s in seeds) <= 2.0
    again = six_star.random_seeds(200, seed=7)
    assert all(np.array_equal(a.x, b.x) and np.array_equal(a.v, b.v) for a, b in zip(seeds, again))


def test_with_separation_copies(six_star):
    alt = six_star.with_separation("product")
    assert alt.controller.separation == "product"
    assert six_star.controller.separation == "spherical"
    assert alt.field is six_star.field


def test_s3_scenario(s3):
    assert s3.dim == 4
    assert len(s3.attitude.omega0) == len(s3.seed_points) == 5
    assert np.allclose(s3.target, [1.0, 0.0, 0.0, 0.0])
    d = copy.deepcopy(raw_scenario("s3_attitude"))
    assert build_scenario(d).dim == 4
