"""Second-order tracking law with distance-dependent damping.

The state is ``(x, v)`` with ``x`` on the sphere and ``v`` an ambient
velocity.  The law

    u = -kd * beta(d) * (v - nu_d(x)) + J_d(x) P(x) v

makes the tracking error ``z = v - nu_d(x)`` obey ``dz/dt = -kd beta z``
exactly, so ``V = |z|^2 / 2`` never increases.  ``beta`` grows like ``1/d``
near the unsafe set and relaxes to 1 beyond ``eps2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, NamedTuple

import numpy as np
from numba import njit

from .errors import BoundaryContactError, InputError
from .geometry import as_point
from .obstacle import ObstacleField
from .planner import (
    CHORDAL,
    CONTACT,
    PRODUCT,
    TWO_TUBES,
    VARIANT_CODES,
    PlannerParams,
    _jd_action,
    _planner_state,
    _raise_for,
    nu_d,
)


class ControlPack(NamedTuple):
    kd: float
    eps1: float
    eps2: float


def _default_phi(d, eps1, eps2):
    s = (d - eps1) / (eps2 - eps1)
    b = s * s * (3.0 - 2.0 * s)
    return (1.0 - b) / d + b


def _check_bridge(phi: Callable[[float], float], eps1: float, eps2: float, h: float = 1e-7, tol: float = 1e-5) -> list[str]:
    """Endpoint conditions a custom bridge must meet for beta to be C^1."""
    problems = []
    lo, hi = float(phi(eps1)), float(phi(eps2))
    dlo = (float(phi(eps1 + h)) - lo) / h
    dhi = (hi - float(phi(eps2 - h))) / h
    if abs(lo - 1.0 / eps1) > tol * max(1.0, 1.0 / eps1):
        problems.append(f"phi(eps1) = {lo:.6g}, expected 1/eps1 = {1.0 / eps1:.6g}")
    if abs(hi - 1.0) > tol:
        problems.append(f"phi(eps2) = {hi:.6g}, expected 1")
    if abs(dlo + 1.0 / eps1**2) > 1e-3 * (1.0 / eps1**2):
        problems.append(f"phi'(eps1) = {dlo:.6g}, expected -1/eps1^2 = {-1.0 / eps1**2:.6g}")
    if abs(dhi) > 1e-3 * max(1.0, 1.0 / eps1**2):
        problems.append(f"phi'(eps2) = {dhi:.6g}, expected 0")
    return problems


@dataclass(frozen=True, eq=False)
class ControllerParams:
    """Damping gain ``kd`` and the knots ``eps1 < eps2`` of the beta schedule.

    ``phi`` optionally replaces the default cubic bridge on [eps1, eps2]; it
    is checked by finite differences for the four C^1 endpoint conditions.
    Custom bridges are honored by :func:`beta` and :func:`control` but not by
    the compiled simulator.
    """

    kd: float = 1.0
    eps1: float = 0.087
    eps2: float = 0.13
    separation: str = "spherical"
    phi: Callable[[float], float] | None = None

    def __post_init__(self):
        if self.kd <= 0:
            raise InputError("kd must be positive")
        if not 0 < self.eps1 < self.eps2:
            raise InputError(f"beta schedule needs 0 < eps1 < eps2, got eps1={self.eps1}, eps2={self.eps2}")
        if self.separation not in VARIANT_CODES:
            raise InputError(f"unknown separation variant {self.separation!r}")
        if self.phi is not None:
            problems = _check_bridge(self.phi, self.eps1, self.eps2)
            if problems:
                raise InputError("custom bridge rejected: " + "; ".join(problems))

    @cached_property
    def pack(self) -> ControlPack:
        return ControlPack(float(self.kd), float(self.eps1), float(self.eps2))

    @property
    def variant(self) -> int:
        return VARIANT_CODES[self.separation]

    @property
    def flat_distance(self) -> float:
        """Spherical distance beyond which beta is identically 1."""
        if self.separation == "chordal":
            return 2.0 * math.asin(min(1.0, math.sqrt(0.5 * self.eps2)))
        return self.eps2


@njit(cache=True)
def _beta(d, e1, e2):
    if d <= e1:
        return 1.0 / d
    if d >= e2:
        return 1.0
    s = (d - e1) / (e2 - e1)
    b = s * s * (3.0 - 2.0 * s)
    return (1.0 - b) / d + b


@njit(cache=True)
def _separation(variant, dmin, d_all):
    if dmin == np.inf:
        return np.inf
    if variant == CHORDAL:
        h = math.sin(0.5 * dmin)
        return 2.0 * h * h
    if variant == PRODUCT:
        p = 1.0
        for i in range(d_all.shape[0]):
            p *= d_all[i]
        return p
    return dmin


@njit(cache=True)
def _control_eval(F, PP, CP, x, v, u, nu, cut):
    """u and nu_d at unit x. Returns (status, separation, spherical distance, beta).

    ``cut`` is a spherical distance beyond which beta is 1 and v_d is constant;
    pass inf when the separation itself is wanted.
    """
    n1 = x.shape[0]
    m = F.kernels.shape[0]
    d_all = np.empty(m)
    pis = np.zeros((max(m, 1), n1))
    vd = np.empty(n1)
    q = np.empty(n1)
    pv = np.empty(n1)
    status, imin, dmin, c = _planner_state(F, PP, x, cut, d_all, pis, vd, q)
    if status == CONTACT or status == TWO_TUBES:
        for k in range(n1):
            u[k] = np.nan
            nu[k] = np.nan
        return status, dmin, dmin, np.nan
    dvar = _separation(PP.variant, dmin, d_all)
    if dvar <= 0.0:
        return CONTACT, dvar, dmin, np.nan
    beta = _beta(dvar, CP.eps1, CP.eps2)
    xvd = 0.0
    xv = 0.0
    for k in range(n1):
        xvd += x[k] * vd[k]
        xv += x[k] * v[k]
    for k in range(n1):
        nu[k] = vd[k] - x[k] * xvd
        pv[k] = v[k] - x[k] * xv
    _jd_action(x, vd, c, q, pis[max(imin, 0)], pv, u)
    g = CP.kd * beta
    for k in range(n1):
        u[k] -= g * (v[k] - nu[k])
    return status, dvar, dmin, beta


def beta(params: ControllerParams, d: float) -> float:
    """Damping schedule: 1/d below eps1, a C^1 bridge on [eps1, eps2], 1 above."""
    if not d > 0:
        raise BoundaryContactError(f"separation {d} is not positive; damping undefined on the unsafe boundary")
    if params.phi is not None and params.eps1 < d < params.eps2:
        return float(params.phi(d))
    return float(_beta(float(d), params.eps1, params.eps2))


def _unpack_state(state, dim: int):
    if hasattr(state, "x") and hasattr(state, "v"):
        x, v = state.x, state.v
    else:
        x, v = state
    x = as_point(x)
    v = np.asarray(v, dtype=np.float64)
    if x.shape[0] != dim or v.shape != x.shape:
        raise InputError("state dimension does not match the scenario")
    return x, v


def _evaluate(params: ControllerParams, planner: PlannerParams, field: ObstacleField, state):
    x, v = _unpack_state(state, field.dim)
    u = np.empty_like(x)
    nu = np.empty_like(x)
    status, dvar, _, b = _control_eval(field.pack, planner.packed_for(params.separation), params.pack, x, v, u, nu, np.inf)
    if status == CONTACT:
        raise BoundaryContactError(f"state is on or inside the unsafe set (separation {dvar:.3g})")
    _raise_for(int(status))
    if params.phi is not None and params.eps1 < dvar < params.eps2:
        # swap the damping term for the custom bridge
        u += params.kd * (b - float(params.phi(dvar))) * (v - nu)
    return u, nu, x, v


def control(params: ControllerParams, planner: PlannerParams, field: ObstacleField, state) -> np.ndarray:
    """Control input u for state (x, v); ``state`` is a SimState or an (x, v) pair."""
    return _evaluate(params, planner, field, state)[0]


def lyapunov_v(planner: PlannerParams, field: ObstacleField, state) -> float:
    """V = |v - nu_d(x)|^2 / 2."""
    x, v = _unpack_state(state, field.dim)
    z = v - nu_d(planner, field, x)
    return 0.5 * float(z @ z)
