import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spherectl.checks import beta_knot_error
from spherectl.controller import ControllerParams, beta, control, lyapunov_v
from spherectl.errors import BoundaryContactError, InputError
from spherectl.geometry import random_points
from spherectl.obstacle import obstacle_distances, separation_chordal, separation_product, separation_spherical, tube_samples
from spherectl.planner import nu_d, tangent_jacobian
from spherectl.sim import SimState, step

CTRL = ControllerParams()


@pytest.mark.parametrize("d", [1e-6, 0.01, 0.05, 0.087])
def test_beta_inverse_branch(d):
    assert beta(CTRL, d) == 1.0 / d


@pytest.mark.parametrize("d", [0.13, 0.2, 1.0, math.pi])
def test_beta_flat_branch(d):
    assert beta(CTRL, d) == 1.0


def test_beta_undefined_on_boundary():
    for d in (0.0, -1e-3, float("nan")):
        with pytest.raises(BoundaryContactError):
            beta(CTRL, d)


def test_beta_is_c1_at_knots(six_star):
    assert beta_knot_error(six_star) < 1e-6


@settings(max_examples=200)
@given(st.floats(1e-4, 0.5), st.floats(1e-4, 0.5))
def test_beta_nonincreasing_and_at_least_one(a, b):
    lo, hi = min(a, b), max(a, b)
    assert beta(CTRL, lo) >= beta(CTRL, hi) - 1e-12
    assert beta(CTRL, hi) >= 1.0


def test_custom_bridge_is_checked():
    e1, e2 = 0.087, 0.13

    def smooth(d):
        s = (d - e1) / (e2 - e1)
        b = s * s * (3 - 2 * s)
        return (1 - b) / d + b

    params = ControllerParams(eps1=e1, eps2=e2, phi=smooth)
    assert beta(params, 0.1) == pytest.approx(beta(CTRL, 0.1), rel=1e-14)
    with pytest.raises(InputError, match="custom bridge"):
        ControllerParams(eps1=e1, eps2=e2, phi=lambda d: 1.0)


def test_knot_ordering_and_variant_validation():
    with pytest.raises(InputError):
        ControllerParams(eps1=0.13, eps2=0.13)
    with pytest.raises(InputError):
        ControllerParams(separation="manhattan")
    assert ControllerParams(separation="chordal").flat_distance == pytest.approx(2 * math.asin(math.sqrt(0.065)))


def test_control_vanishes_at_equilibrium(six_star):
    u = control(six_star.controller, six_star.planner, six_star.field, (six_star.target, np.zeros(3)))
    assert np.allclose(u, 0.0, atol=1e-15)


def test_control_law_structure(six_star, rng):
    scen = six_star
    pts, _, _ = tube_samples(scen.field[3], 5, 0.1, rng, min_distance=1e-2)
    for x in pts:
        v = rng.standard_normal(3)
        u = control(scen.controller, scen.planner, scen.field, (x, v))
        d = obstacle_distances(scen.field, x).min()
        nu = nu_d(scen.planner, scen.field, x)
        J = tangent_jacobian(scen.planner, scen.field, x)
        expected = -scen.controller.kd * beta(scen.controller, d) * (v - nu) + J @ v
        assert np.allclose(u, expected, atol=1e-12)


@pytest.mark.parametrize("variant, sep", [("chordal", separation_chordal), ("product", separation_product)])
def test_separation_variant_only_changes_damping(six_star, rng, variant, sep):
    scen = six_star
    alt = scen.with_separation(variant)
    pts, _, _ = tube_samples(scen.field[0], 5, 0.1, rng, min_distance=1e-2)
    for x in pts:
        v = rng.standard_normal(3)
        u0 = control(scen.controller, scen.planner, scen.field, (x, v))
        u1 = control(alt.controller, alt.planner, alt.field, (x, v))
        z = v - nu_d(scen.planner, scen.field, x)
        b0 = beta(scen.controller, separation_spherical(scen.field, x))
        b1 = beta(alt.controller, sep(scen.field, x))
        assert np.allclose(u1 - u0, -(b1 - b0) * z, atol=1e-10)


def test_contact_raises(six_star):
    with pytest.raises(BoundaryContactError):
        control(six_star.controller, six_star.planner, six_star.field, (six_star.field[0].kernel, np.zeros(3)))


def test_lyapunov_definition(six_star):
    x = np.array([0.2, 0.3, 0.9]) / np.linalg.norm([0.2, 0.3, 0.9])
    v = np.array([0.5, -0.1, 0.3])
    z = v - nu_d(six_star.planner, six_star.field, x)
    assert lyapunov_v(six_star.planner, six_star.field, SimState(x, v)) == pytest.approx(0.5 * z @ z)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_lyapunov_rate_equals_damping_dissipation(six_star, seed):
    # dV/dt = -kd beta |v - nu_d|^2 along the closed loop, measured by one short step
    rng = np.random.default_rng(seed)
    scen = six_star
    obs = scen.field[seed % len(scen.field)]
    if seed % 2:
        x = tube_samples(obs, 1, 0.15, rng, min_distance=5e-3)[0][0]
    else:
        x = random_points(rng, 1, 3)[0]
        if obstacle_distances(scen.field, x).min() < 5e-3:
            return
    v = rng.standard_normal(3)
    state = SimState(x, v)
    h = 1e-6
    v0 = lyapunov_v(scen.planner, scen.field, state)
    v1 = lyapunov_v(scen.planner, scen.field, step(scen, state, h))
    b = beta(scen.controller, obstacle_distances(scen.field, x).min())
    rate = -scen.controller.kd * b * 2 * v0
    assert (v1 - v0) / h == pytest.approx(rate, rel=1e-3, abs=1e-6)
