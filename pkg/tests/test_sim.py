import numpy as np
import pytest

from spherectl.errors import BoundaryContactError, InputError, NumericalBlowupError
from spherectl.geometry import sphere_angle
from spherectl.obstacle import obstacle_distances, tube_samples
from spherectl.sim import SimConfig, SimState, Trajectory, batch_simulate, simulate, step, thread_cap

from conftest import free_scenario


def test_equilibrium_is_fixed(six_star):
    s = SimState(six_star.target, np.zeros(3))
    for _ in range(10):
        s = step(six_star, s, 1e-3)
    assert np.allclose(s.x, six_star.target, atol=1e-14)
    assert np.allclose(s.v, 0.0, atol=1e-14)


def test_free_sphere_converges_monotonically(free_s2):
    x0 = np.array([1.0, 0.2, -0.3])
    tr = simulate(free_s2, (x0, np.zeros(3)), SimConfig(horizon=30.0, log_every=100))
    assert tr.ok
    dist = np.array([sphere_angle(x, free_s2.target) for x in tr.x])
    assert np.all(np.diff(dist) < 1e-12)
    assert dist[-1] < 1e-2
    assert np.linalg.norm(tr.final.v) < 1e-3


def test_norm_preserved_and_log_shape(six_star):
    tr = simulate(six_star, six_star.seeds(1)[0], SimConfig(horizon=5.0, log_every=10))
    assert tr.log.shape == (501, 11)
    assert list(Trajectory.columns(3)) == ["t", "x0", "x1", "x2", "v0", "v1", "v2", "d_U", "norm_u", "norm_v_err", "V"]
    assert np.allclose(np.linalg.norm(tr.x, axis=1), 1.0, atol=1e-12)
    assert np.all(np.diff(tr.times) > 0)
    assert tr.times[-1] == pytest.approx(5.0)


def test_logged_diagnostics_are_consistent(six_star):
    tr = simulate(six_star, six_star.seeds(1)[0], SimConfig(horizon=2.0, log_every=50))
    for row in range(0, len(tr.times), 7):
        d = obstacle_distances(six_star.field, tr.x[row]).min()
        assert tr.d_U[row] == pytest.approx(d, abs=1e-12)
        assert tr.V[row] == pytest.approx(0.5 * tr.norm_v_err[row] ** 2, rel=1e-12)
    assert tr.min_separation <= tr.d_U.min() + 1e-15


def test_step_halving_changes_endpoint_little(six_star):
    xi = six_star.seeds(1)[0]
    a = simulate(six_star, xi, SimConfig(h=1e-3, horizon=2.0, log_every=2000))
    b = simulate(six_star, xi, SimConfig(h=5e-4, horizon=2.0, log_every=4000))
    end_a = np.concatenate([a.final.x, a.final.v])
    end_b = np.concatenate([b.final.x, b.final.v])
    assert np.linalg.norm(end_a - end_b) / np.linalg.norm(end_b) < 1e-8


def _endpoint_changes(scenario, xi, locate):
    ends = []
    for h in (2e-3, 1e-3, 5e-4):
        t = simulate(scenario, xi, SimConfig(h=h, horizon=1.0, log_every=10**6, locate_knots=locate))
        ends.append(np.concatenate([t.final.x, t.final.v]))
    return np.linalg.norm(ends[0] - ends[1]), np.linalg.norm(ends[1] - ends[2])


def test_knot_location_restores_fourth_order(six_star):
    # seed 3 crosses eps1 and eps2 twice in the first second
    xi = six_star.seeds()[3]
    coarse, fine = _endpoint_changes(six_star, xi, True)
    assert 10.0 < coarse / fine < 25.0
    coarse, fine = _endpoint_changes(six_star, xi, False)
    assert coarse / fine < 5.0


def test_log_thinning_keeps_monitors(six_star):
    xi = six_star.seeds(1)[0]
    full = simulate(six_star, xi, SimConfig(horizon=3.0, log_every=1))
    thin = simulate(six_star, xi, SimConfig(horizon=3.0, log_every=100))
    assert np.array_equal(full.log[::100], thin.log[:-1] if len(thin.log) > len(full.log[::100]) else thin.log)
    assert full.min_separation == thin.min_separation
    assert full.max_control == thin.max_control
    assert full.monotone_violations == thin.monotone_violations == 0


def test_batch_is_deterministic_and_ordered(six_star):
    seeds = six_star.seeds(3)
    cfg = SimConfig(horizon=1.0, log_every=50)
    a = batch_simulate(six_star, seeds, cfg, threads=2)
    b = batch_simulate(six_star, list(reversed(seeds)), cfg, threads=1)
    for ta, tb in zip(a, reversed(b)):
        assert np.array_equal(ta.log, tb.log)


def test_batch_isolates_infeasible_seed(six_star):
    seeds = six_star.seeds(9) + [SimState(six_star.field[0].kernel, np.zeros(3))]
    out = batch_simulate(six_star, seeds, SimConfig(horizon=0.5, log_every=100))
    assert [t.status for t in out].count("ok") == 9
    assert out[-1].status == "infeasible"


def test_fast_approach_triggers_substeps_and_stays_safe(six_star, rng):
    obs = six_star.field[0]
    pts, base, _ = tube_samples(obs, 1, 0.03, rng, min_distance=0.02)
    x = pts[0]
    v = 10.0 * (base[0] - x) / np.linalg.norm(base[0] - x)
    tr = simulate(six_star, (x, v), SimConfig(horizon=3.0, log_every=10))
    assert tr.ok
    assert tr.max_substeps > 1
    assert tr.min_separation > 0
    assert tr.monotone_violations == 0


def test_contact_and_blowup_errors(six_star):
    with pytest.raises(BoundaryContactError):
        step(six_star, (six_star.field[0].kernel, np.zeros(3)), 1e-3)
    with pytest.raises(NumericalBlowupError):
        step(six_star, (six_star.target, np.array([np.inf, 0.0, 0.0])), 1e-3)
    tr = simulate(six_star, (six_star.target, np.array([np.nan, 0.0, 0.0])), SimConfig(horizon=0.1))
    assert tr.status == "blowup"


@pytest.mark.parametrize("kwargs", [{"h": 0.0}, {"h": 0.02}, {"h": 1e-6, "horizon": 100.0}, {"log_every": 0}])
def test_config_guards(kwargs):
    with pytest.raises(InputError):
        SimConfig(**kwargs)


def test_dimension_mismatch(six_star):
    with pytest.raises(InputError):
        simulate(six_star, ([1.0, 0, 0, 0], np.zeros(4)))


def test_thread_cap_env(monkeypatch):
    monkeypatch.setenv("SPHERECTL_THREADS", "3")
    assert thread_cap() == 3
    monkeypatch.setenv("SPHERECTL_THREADS", "many")
    with pytest.raises(InputError):
        thread_cap()


def test_higher_dimensional_free_sphere():
    scen = free_scenario(dimension=4)
    x0 = np.array([1.0, 0.5, -0.2, 0.1, 0.3])
    tr = simulate(scen, (x0, np.array([0.0, 1.0, 0.0, 0.0, 0.0])), SimConfig(horizon=20.0, log_every=1000))
    assert tr.ok and tr.monotone_violations == 0
    assert sphere_angle(tr.final.x, scen.target) < 1e-2
