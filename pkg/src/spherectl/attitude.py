"""Rigid-body attitude on unit quaternions x = [eta, q] in S^3.

Kinematics x' = A(x) w / 2 with A(x) = [-q^T; eta I + q^x], dynamics
J w' = -w x J w + tau.  The torque law cancels the gyroscopic term and
feeds the sphere controller through v = A(x) w / 2, so the angular-velocity
error w - w_f(x) decays like the sphere tracking error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .controller import ControllerParams, _control_eval
from .controller import beta as beta_fn
from .errors import ConfigurationError, InputError, NumericalBlowupError
from .geometry import as_point
from .obstacle import SEPARATIONS, ObstacleField
from .planner import BLOWUP, CONTACT, OK, TWO_TUBES, PlannerParams, jacobian_jd, nu_d
from .sim import SimConfig, simulate


@dataclass(frozen=True, eq=False)
class InertiaMatrix:
    """Symmetric positive definite 3x3 inertia (kg m^2)."""

    J: np.ndarray

    def __post_init__(self):
        J = np.asarray(self.J, dtype=np.float64)
        if J.shape != (3, 3):
            raise InputError(f"inertia must be 3x3, got {J.shape}")
        if np.max(np.abs(J - J.T)) > 1e-12:
            raise InputError("inertia must be symmetric")
        if np.linalg.eigvalsh(J).min() <= 0:
            raise InputError("inertia must be positive definite")
        object.__setattr__(self, "J", J)

    @property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.J)


@dataclass(frozen=True, eq=False)
class RigidBodyState:
    x: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        x = as_point(self.x)
        if x.shape != (4,):
            raise InputError("attitude must be a unit quaternion with 4 entries")
        w = np.asarray(self.omega, dtype=np.float64).copy()
        if w.shape != (3,):
            raise InputError("angular velocity must have 3 entries")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "omega", w)


def _inertia(J) -> np.ndarray:
    return J.J if isinstance(J, InertiaMatrix) else InertiaMatrix(J).J


def skew(p) -> np.ndarray:
    """Matrix of p x (.)."""
    return np.array([[0.0, -p[2], p[1]], [p[2], 0.0, -p[0]], [-p[1], p[0], 0.0]])


def a_matrix(x) -> np.ndarray:
    """A(x) = [-q^T; eta I + q^x]; linear in x."""
    x = np.asarray(x, dtype=np.float64)
    eta, q = x[0], x[1:]
    return np.vstack([-q[None, :], eta * np.eye(3) + skew(q)])


def omega_f(planner: PlannerParams, field: ObstacleField, x) -> np.ndarray:
    """Desired angular velocity 2 A(x)^T nu_d(x)."""
    x = as_point(x)
    return 2.0 * a_matrix(x).T @ nu_d(planner, field, x)


def _check(field: ObstacleField):
    if field.dim != 4:
        raise InputError("attitude control needs obstacles on S^3")


def torque(ctrl: ControllerParams, planner: PlannerParams, field: ObstacleField, J_m, state: RigidBodyState) -> np.ndarray:
    """tau = w x J w + J u_f with u_f = -kd beta (w - w_f) + A^T J_d A w."""
    _check(field)
    J = _inertia(J_m)
    x, w = state.x, state.omega
    A = a_matrix(x)
    d = SEPARATIONS[ctrl.separation](field, x) if len(field) else math.inf
    b = 1.0 if d == math.inf else beta_fn(ctrl, d)
    uf = -ctrl.kd * b * (w - omega_f(planner, field, x)) + A.T @ jacobian_jd(planner, field, x) @ A @ w
    return np.cross(w, J @ w) + J @ uf


def _rigid_rhs(J, Jinv, x, w, tau):
    return 0.5 * a_matrix(x) @ w, Jinv @ (tau - np.cross(w, J @ w))


def quaternion_step(J_m, state: RigidBodyState, tau, h: float) -> RigidBodyState:
    """RK4 step of the rigid body under a constant torque, then renormalize."""
    if not h > 0:
        raise InputError("step must be positive")
    J = _inertia(J_m)
    Jinv = np.linalg.inv(J)
    tau = np.asarray(tau, dtype=np.float64)
    x, w = state.x, state.omega
    k1 = _rigid_rhs(J, Jinv, x, w, tau)
    k2 = _rigid_rhs(J, Jinv, x + 0.5 * h * k1[0], w + 0.5 * h * k1[1], tau)
    k3 = _rigid_rhs(J, Jinv, x + 0.5 * h * k2[0], w + 0.5 * h * k2[1], tau)
    k4 = _rigid_rhs(J, Jinv, x + h * k3[0], w + h * k3[1], tau)
    xn = x + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    wn = w + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return RigidBodyState(xn / np.linalg.norm(xn), wn)


@dataclass
class AttitudeTrajectory:
    times: np.ndarray
    x: np.ndarray
    omega: np.ndarray
    d_U: np.ndarray
    omega_err: np.ndarray  # |w - w_f(x)|
    v_err: np.ndarray  # |v - nu_d(x)| with v = A(x) w / 2
    status: str = "ok"
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def v(self) -> np.ndarray:
        """Sphere velocities A(x) w / 2 along the run."""
        return np.array([0.5 * a_matrix(x) @ w for x, w in zip(self.x, self.omega)])


@njit(cache=True)
def _fill_a(x, A):
    eta, q1, q2, q3 = x[0], x[1], x[2], x[3]
    A[0, 0] = -q1
    A[0, 1] = -q2
    A[0, 2] = -q3
    A[1, 0] = eta
    A[1, 1] = -q3
    A[1, 2] = q2
    A[2, 0] = q3
    A[2, 1] = eta
    A[2, 2] = -q1
    A[3, 0] = -q2
    A[3, 1] = q1
    A[3, 2] = eta


@njit(cache=True)
def _cross(a, b, out):
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]


@njit(cache=True)
def _att_rhs(F, PP, CP, J, Jinv, x, w, dx, dw, diag):
    """Closed-loop slopes; diag receives (separation, |w - w_f|, |v - nu_d|)."""
    xh = x / math.sqrt(x[0] ** 2 + x[1] ** 2 + x[2] ** 2 + x[3] ** 2)
    A = np.empty((4, 3))
    _fill_a(xh, A)
    v = 0.5 * (A @ w)
    u = np.empty(4)
    nu = np.empty(4)
    status, dvar, _, _ = _control_eval(F, PP, CP, xh, v, u, nu, np.inf)
    if status == CONTACT or status == TWO_TUBES:
        return status
    uf = 2.0 * (A.T @ u)
    Jw = J @ w
    gyro = np.empty(3)
    _cross(w, Jw, gyro)
    tau = gyro + J @ uf
    dw[:] = Jinv @ (tau - gyro)
    dx[:] = 0.5 * (A @ w)
    wf = 2.0 * (A.T @ nu)
    diag[0] = dvar
    diag[1] = math.sqrt(np.sum((w - wf) ** 2))
    diag[2] = math.sqrt(np.sum((v - nu) ** 2))
    return status


@njit(cache=True)
def _run_attitude(F, PP, CP, J, Jinv, x0, w0, h, n, xs, ws, diags):
    x = x0.copy()
    w = w0.copy()
    xs[0] = x
    ws[0] = w
    k1x, k2x, k3x, k4x = np.empty(4), np.empty(4), np.empty(4), np.empty(4)
    k1w, k2w, k3w, k4w = np.empty(3), np.empty(3), np.empty(3), np.empty(3)
    scratch = np.empty(3)
    status = _att_rhs(F, PP, CP, J, Jinv, x, w, k1x, k1w, diags[0])
    if status == CONTACT or status == TWO_TUBES:
        return status, 0
    for i in range(n):
        status = _att_rhs(F, PP, CP, J, Jinv, x + 0.5 * h * k1x, w + 0.5 * h * k1w, k2x, k2w, scratch)
        if status == CONTACT or status == TWO_TUBES:
            return status, i
        status = _att_rhs(F, PP, CP, J, Jinv, x + 0.5 * h * k2x, w + 0.5 * h * k2w, k3x, k3w, scratch)
        if status == CONTACT or status == TWO_TUBES:
            return status, i
        status = _att_rhs(F, PP, CP, J, Jinv, x + h * k3x, w + h * k3w, k4x, k4w, scratch)
        if status == CONTACT or status == TWO_TUBES:
            return status, i
        x = x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        w = w + h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
        x = x / math.sqrt(np.sum(x * x))
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
            return BLOWUP, i + 1
        xs[i + 1] = x
        ws[i + 1] = w
        # slopes at the new state double as its diagnostics
        status = _att_rhs(F, PP, CP, J, Jinv, x, w, k1x, k1w, diags[i + 1])
        if status == CONTACT or status == TWO_TUBES:
            return status, i + 1
    return OK, n


def simulate_attitude(scenario, state0: RigidBodyState, h: float = 1e-3, horizon: float = 10.0, J_m=None) -> AttitudeTrajectory:
    """Closed-loop RK4 with the torque re-evaluated at every stage; quaternion renormalized per step."""
    _check(scenario.field)
    if scenario.controller.phi is not None:
        raise InputError("custom beta bridges are not supported in the attitude loop")
    if J_m is None:
        if scenario.attitude is None:
            raise InputError("scenario has no attitude block; pass an inertia matrix")
        J_m = scenario.attitude.inertia
    J = _inertia(J_m)
    n = int(round(horizon / h))
    xs = np.zeros((n + 1, 4))
    ws = np.zeros((n + 1, 3))
    diags = np.zeros((n + 1, 3))
    status, last = _run_attitude(
        scenario.field.pack,
        scenario.planner.packed_for(scenario.controller.separation),
        scenario.controller.pack,
        J,
        np.linalg.inv(J),
        state0.x,
        state0.omega,
        float(h),
        n,
        xs,
        ws,
        diags,
    )
    if status == BLOWUP:
        raise NumericalBlowupError(f"non-finite attitude state at step {last}")
    if status == TWO_TUBES:
        raise ConfigurationError("attitude entered two obstacle tubes")
    name = "contact" if status == CONTACT else "ok"
    message = f"attitude left the free space at step {last}" if status == CONTACT else ""
    k = last + 1
    return AttitudeTrajectory(
        times=np.arange(k) * h,
        x=xs[:k],
        omega=ws[:k],
        d_U=diags[:k, 0],
        omega_err=diags[:k, 1],
        v_err=diags[:k, 2],
        status=name,
        message=message,
    )


@dataclass
class EquivalenceReport:
    max_state_error: float  # max over steps of |x_att - x_sph| + |A w / 2 - v_sph|
    max_x_error: float
    max_identity_error: float  # max | |v - nu_d| - |w - w_f| / 2 |
    horizon: float

    def passed(self, state_tol: float = 1e-6, identity_tol: float = 1e-10) -> bool:
        return self.max_state_error < state_tol and self.max_identity_error < identity_tol


def equivalence_check(scenario, state0: RigidBodyState, h: float = 1e-3, horizon: float = 10.0, J_m=None) -> EquivalenceReport:
    """Run the attitude loop and the sphere loop from v(0) = A(x0) w0 / 2 and compare."""
    att = simulate_attitude(scenario, state0, h, horizon, J_m)
    v0 = 0.5 * a_matrix(state0.x) @ state0.omega
    sph = simulate(scenario, (state0.x, v0), SimConfig(h=h, horizon=horizon, substep=False, locate_knots=False))
    k = min(len(att.times), len(sph.times))
    dx = np.linalg.norm(att.x[:k] - sph.x[:k], axis=1)
    dv = np.linalg.norm(att.v[:k] - sph.v[:k], axis=1)
    ident = np.abs(att.v_err - 0.5 * att.omega_err)
    return EquivalenceReport(
        max_state_error=float(np.max(dx + dv)),
        max_x_error=float(np.max(dx)),
        max_identity_error=float(np.max(ident)),
        horizon=float(att.times[k - 1]) if k else 0.0,
    )
