import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spherectl.attitude import (
    InertiaMatrix,
    RigidBodyState,
    a_matrix,
    equivalence_check,
    omega_f,
    quaternion_step,
    simulate_attitude,
    torque,
)
from spherectl.controller import control
from spherectl.errors import InputError
from spherectl.geometry import projection_matrix, random_points
from spherectl.obstacle import obstacle_distances
from spherectl.planner import nu_d


def _quat(seed):
    return random_points(np.random.default_rng(seed), 1, 4)[0]


def test_a_matrix_at_identity():
    assert np.array_equal(a_matrix([1.0, 0.0, 0.0, 0.0]), np.vstack([np.zeros(3), np.eye(3)]))


@settings(max_examples=100)
@given(st.integers(0, 10**6))
def test_a_matrix_identities(seed):
    x = _quat(seed)
    A = a_matrix(x)
    assert np.allclose(A.T @ A, np.eye(3), atol=1e-12)
    assert np.allclose(A.T @ x, 0.0, atol=1e-12)
    assert np.allclose(A @ A.T, projection_matrix(x), atol=1e-12)


@settings(max_examples=50)
@given(st.integers(0, 10**6))
def test_a_of_velocity_applied_to_omega(seed):
    rng = np.random.default_rng(seed)
    x = _quat(seed)
    w = rng.standard_normal(3)
    xdot = 0.5 * a_matrix(x) @ w
    # A is linear in x, so A(xdot) w is the time derivative of A(x) w at fixed w
    assert np.allclose(a_matrix(xdot) @ w, -0.5 * (w @ w) * x, atol=1e-10)


def test_omega_f_relations(s3, rng):
    p, f = s3.planner, s3.field
    assert np.allclose(omega_f(p, f, s3.target), 0.0)
    for x in random_points(rng, 30, 4):
        if obstacle_distances(f, x).min() <= 1e-3:
            continue
        nu = nu_d(p, f, x)
        wf = omega_f(p, f, x)
        assert np.allclose(0.5 * a_matrix(x) @ wf, nu, atol=1e-12)
        w = rng.standard_normal(3)
        v = 0.5 * a_matrix(x) @ w
        assert np.linalg.norm(v - nu) == pytest.approx(0.5 * np.linalg.norm(w - wf), abs=1e-12)


def test_torque_at_equilibrium_and_gyroscopic_term(s3):
    eq = RigidBodyState(s3.target, np.zeros(3))
    assert np.allclose(torque(s3.controller, s3.planner, s3.field, s3.attitude.inertia, eq), 0.0)
    # with J = I the gyroscopic term w x J w vanishes; torque reduces to u_f
    x = s3.seed_points[0]
    w = np.array([0.3, -0.2, 0.5])
    tau = torque(s3.controller, s3.planner, s3.field, np.eye(3), RigidBodyState(x, w))
    v = 0.5 * a_matrix(x) @ w
    uf = 2 * a_matrix(x).T @ control(s3.controller, s3.planner, s3.field, (x, v))
    assert np.allclose(tau, uf, atol=1e-12)


def test_inertia_validation():
    with pytest.raises(InputError):
        InertiaMatrix(np.array([[1.0, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]))
    with pytest.raises(InputError):
        InertiaMatrix(np.diag([1.0, -1.0, 1.0]))


def test_cancelled_gyroscopics_hold_state():
    J = np.diag([1.0, 2.0, 3.0])
    s = RigidBodyState(_quat(3), np.zeros(3))
    for _ in range(100):
        s = quaternion_step(J, s, np.zeros(3), 1e-2)
    assert np.allclose(s.x, _quat(3), atol=1e-15)
    assert np.allclose(s.omega, 0.0)


def test_free_rotation_conserves_speed_and_norm():
    s = RigidBodyState(_quat(5), np.array([0.4, -1.1, 0.7]))
    w0 = np.linalg.norm(s.omega)
    for _ in range(10_000):
        s = quaternion_step(np.eye(3), s, np.zeros(3), 1e-3)
        assert abs(np.linalg.norm(s.x) - 1.0) < 1e-12
    assert np.linalg.norm(s.omega) == pytest.approx(w0, abs=1e-9)


def test_asymmetric_free_rotation_conserves_energy_and_momentum():
    J = np.diag([1.0, 2.0, 3.0])
    s = RigidBodyState(_quat(6), np.array([0.3, 0.2, -0.4]))
    e0, m0 = s.omega @ J @ s.omega, np.linalg.norm(J @ s.omega)
    for _ in range(2000):
        s = quaternion_step(J, s, np.zeros(3), 1e-3)
    assert s.omega @ J @ s.omega == pytest.approx(e0, rel=1e-10)
    assert np.linalg.norm(J @ s.omega) == pytest.approx(m0, rel=1e-10)


def test_closed_loop_is_safe_and_tracking_error_decays(s3):
    for i, w0 in enumerate(s3.attitude.omega0):
        tr = simulate_attitude(s3, RigidBodyState(s3.seed_points[i], w0), horizon=5.0)
        assert tr.ok
        assert np.all(tr.d_U > 0)
        assert np.all(np.diff(tr.omega_err) <= 1e-9)
        assert np.allclose(np.linalg.norm(tr.x, axis=1), 1.0, atol=1e-12)
        assert np.max(np.abs(tr.v_err - 0.5 * tr.omega_err)) < 1e-10


def _tangent_sphere_loop(scen, x, v, h, n):
    """RK4 of x' = P v, v' = P u - |v|^2 x: the sphere loop with v held tangent."""

    def rhs(x, v):
        xh = x / np.linalg.norm(x)
        u = control(scen.controller, scen.planner, scen.field, (xh, v))
        P = projection_matrix(xh)
        return P @ v, P @ u - (v @ P @ v) * xh

    xs = [x]
    for _ in range(n):
        k1 = rhs(x, v)
        k2 = rhs(x + 0.5 * h * k1[0], v + 0.5 * h * k1[1])
        k3 = rhs(x + 0.5 * h * k2[0], v + 0.5 * h * k2[1])
        k4 = rhs(x + h * k3[0], v + h * k3[1])
        x = x + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        v = v + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        x = x / np.linalg.norm(x)
        xs.append(x)
    return np.array(xs), v


def test_attitude_matches_tangent_constrained_sphere_loop(s3):
    h, n = 1e-3, 3000
    x0, w0 = s3.seed_points[1], np.array(s3.attitude.omega0[1])
    tr = simulate_attitude(s3, RigidBodyState(x0, w0), h=h, horizon=n * h)
    xs, v_end = _tangent_sphere_loop(s3, x0, 0.5 * a_matrix(x0) @ w0, h, n)
    assert np.max(np.linalg.norm(tr.x - xs, axis=1)) < 1e-8
    assert np.linalg.norm(tr.v[-1] - v_end) < 1e-8


def test_equivalence_from_matched_velocity(s3):
    # starting on the desired field, both loops follow the kinematic flow
    x0 = s3.seed_points[2]
    rep = equivalence_check(s3, RigidBodyState(x0, omega_f(s3.planner, s3.field, x0)), horizon=10.0)
    assert rep.passed()


def test_attitude_requires_s3(six_star):
    with pytest.raises(InputError):
        simulate_attitude(six_star, RigidBodyState([1.0, 0, 0, 0], np.zeros(3)), J_m=np.eye(3))
