"""Kinematic desired vector field around star-shaped obstacles.

Far from every obstacle the field is the constant ``k1 * x_d``; inside the
``eps``-tube of obstacle ``i`` it blends towards ``-(k1/kappa) g_i`` with the
quintic smoothstep ``alpha`` of the distance, so the field pushes away from
the kernel near the boundary.  The projected field ``nu_d = P(x) v_d`` is
what the kinematic closed loop follows.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np
from numba import njit

from .errors import (
    ConfigurationError,
    InfeasibleStateError,
    InputError,
    NearBoundaryJacobianError,
)
from .geometry import as_point, projection_matrix
from .obstacle import ObstacleField, _distances, _dot

# kernel status codes shared with controller/sim
OK = 0
CONTACT = 1
NEAR_BOUNDARY = 2
TWO_TUBES = 3
BLOWUP = 4

SIN_GUARD = 1e-6

SPHERICAL = 0
CHORDAL = 1
PRODUCT = 2
VARIANT_CODES = {"spherical": SPHERICAL, "chordal": CHORDAL, "product": PRODUCT}


class PlannerPack(NamedTuple):
    xd: np.ndarray
    k1: float
    kappa: float
    eps: float
    variant: int


@dataclass(frozen=True, eq=False)
class PlannerParams:
    """Gains of the desired field: ``k1`` field gain, ``kappa`` repulsion scale, ``eps`` tube width."""

    target: np.ndarray
    k1: float = 1.0
    kappa: float = 1.0
    eps: float = 0.13

    def __post_init__(self):
        object.__setattr__(self, "target", as_point(self.target))
        if self.k1 <= 0 or self.kappa <= 0:
            raise InputError("k1 and kappa must be positive")
        if not 0 < self.eps < math.pi / 2:
            raise InputError("eps must lie in (0, pi/2)")

    @cached_property
    def pack(self) -> PlannerPack:
        return PlannerPack(self.target, float(self.k1), float(self.kappa), float(self.eps), SPHERICAL)

    def packed_for(self, variant: str) -> PlannerPack:
        return self.pack._replace(variant=VARIANT_CODES[variant])


@njit(cache=True)
def _alpha(p, eps):
    s = min(max(p / eps, 0.0), 1.0)
    a = s * s * s * (s * (6.0 * s - 15.0) + 10.0)
    da = 30.0 * s * s * (s - 1.0) * (s - 1.0) / eps
    return a, da


@njit(cache=True)
def _planner_state(F, PP, x, cut, d_all, pis, vd, q):
    """Evaluate v_d at unit x.

    Writes v_d to ``vd`` and the rank-one Jacobian factor to ``q`` so that
    dv_d/dx = c * q pi^T.  Distances beyond ``cut`` (>= eps) are not resolved
    exactly.  Returns (status, nearest index, nearest distance, c).
    """
    m = F.kernels.shape[0]
    n1 = x.shape[0]
    imin = -1
    dmin = np.inf
    n_eps = 0
    inside = False
    if m > 0:
        imin, dmin, n_eps, inside = _distances(F, x, PP.eps, max(cut, PP.eps), PP.variant == PRODUCT, d_all, pis)
    status = OK
    if inside or dmin <= 0.0:
        status = CONTACT
    elif n_eps > 1:
        status = TWO_TUBES
    c = 0.0
    if status == OK and imin >= 0 and dmin <= PP.eps:
        if dmin < SIN_GUARD:
            status = NEAR_BOUNDARY
        a, da = _alpha(dmin, PP.eps)
        for k in range(n1):
            g = F.kernels[imin, k]
            vd[k] = PP.k1 * (a * PP.xd[k] - (1.0 - a) * g / PP.kappa)
            q[k] = PP.xd[k] + g / PP.kappa
        c = -PP.k1 * da / math.sin(dmin)
    else:
        for k in range(n1):
            vd[k] = PP.k1 * PP.xd[k]
            q[k] = 0.0
    return status, imin, dmin, c


@njit(cache=True)
def _jd_action(x, vd, c, q, pi, w, out):
    """out = J_d(x) w for the ambient Jacobian of nu_d = P(x) v_d(x)."""
    n1 = x.shape[0]
    s = c * _dot(pi, w)
    xq = _dot(x, q) * s
    xvd = _dot(x, vd)
    vdw = _dot(vd, w)
    for k in range(n1):
        out[k] = s * q[k] - x[k] * xq - x[k] * vdw - xvd * w[k]


def alpha(p: float, eps: float) -> float:
    """Quintic smoothstep 6s^5 - 15s^4 + 10s^3 with s = p / eps."""
    if p < 0.0 or p > eps:
        warnings.warn(f"alpha argument {p} outside [0, {eps}] was clamped", RuntimeWarning, stacklevel=2)
    return float(_alpha(p, eps)[0])


def alpha_derivatives(p: float, eps: float) -> tuple[float, float, float]:
    """(alpha, alpha', alpha'') at p."""
    s = min(max(p / eps, 0.0), 1.0)
    a, da = _alpha(p, eps)
    dda = 60.0 * s * (s - 1.0) * (2.0 * s - 1.0) / eps**2
    return float(a), float(da), float(dda)


class _PlannerEval(NamedTuple):
    status: int
    index: int
    distance: float
    coef: float
    vd: np.ndarray
    q: np.ndarray
    pi: np.ndarray


def _evaluate(params: PlannerParams, field: ObstacleField, x) -> _PlannerEval:
    x = as_point(x)
    if x.shape[0] != field.dim or params.target.shape[0] != field.dim:
        raise InputError("dimension mismatch between point, target and obstacle field")
    m = len(field)
    d_all = np.empty(m)
    pis = np.zeros((max(m, 1), field.dim))
    vd = np.empty(field.dim)
    q = np.empty(field.dim)
    status, idx, dist, c = _planner_state(field.pack, params.pack, x, np.inf, d_all, pis, vd, q)
    pi = pis[idx].copy() if idx >= 0 else np.zeros(field.dim)
    return _PlannerEval(int(status), int(idx), float(dist), float(c), vd, q, pi)


def _raise_for(status: int) -> None:
    if status == CONTACT:
        raise InfeasibleStateError("point is not in the free space")
    if status == TWO_TUBES:
        raise ConfigurationError("point lies in the eps-tubes of two obstacles; tubes must be disjoint")


def desired_field(params: PlannerParams, field: ObstacleField, x) -> np.ndarray:
    """v_d(x) in ambient coordinates."""
    ev = _evaluate(params, field, x)
    _raise_for(ev.status)
    return ev.vd


def nu_d(params: PlannerParams, field: ObstacleField, x) -> np.ndarray:
    """Projected field P(x) v_d(x)."""
    x = as_point(x)
    vd = desired_field(params, field, x)
    return vd - x * (x @ vd)


def jacobian_jd(params: PlannerParams, field: ObstacleField, x) -> np.ndarray:
    """Ambient Jacobian of nu_d, P dv_d/dx - x v_d^T - (x . v_d) I.

    Inside a tube dv_d/dx = -k1 alpha'(d)/sin(d) (x_d + g/kappa) pi^T.
    """
    x = as_point(x)
    ev = _evaluate(params, field, x)
    _raise_for(ev.status)
    if ev.status == NEAR_BOUNDARY:
        raise NearBoundaryJacobianError(f"distance {ev.distance:.3g} below {SIN_GUARD:g}; sin(d) guard tripped")
    dvd = ev.coef * np.outer(ev.q, ev.pi)
    return projection_matrix(x) @ dvd - np.outer(x, ev.vd) - (x @ ev.vd) * np.eye(x.shape[0])


def tangent_jacobian(params: PlannerParams, field: ObstacleField, x) -> np.ndarray:
    """Intrinsic Jacobian J_d(x) P(x): the differential of nu_d along the sphere.

    It is also the Jacobian of the radially constant extension
    nu_d(x / |x|), so it annihilates x.
    """
    x = as_point(x)
    return jacobian_jd(params, field, x) @ projection_matrix(x)
