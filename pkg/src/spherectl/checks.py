"""Invariant and derivative checks run by ``spherectl check``.

Every derivative is compared against central finite differences of an
independently evaluated quantity; nothing here reuses the analytic formula
being checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import eigenstructure_check, estimate_mu, find_equilibria
from .controller import beta
from .errors import SphereCtlError
from .geometry import random_points, tangent_basis
from .obstacle import (
    check_projection_uniqueness,
    closest_point,
    obstacle_distances,
    separation_gradient,
    separation_spherical,
    tube_samples,
    validate_assumption2,
)
from .planner import desired_field, jacobian_jd, nu_d


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def row(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark}  {self.name:<34} value={self.value:<12.4g} limit={self.threshold:<10.3g} {self.detail}"


def _retract(x, t):
    y = x + t
    return y / np.linalg.norm(y)


def gradient_fd_error(scenario, count: int = 1000, seed: int = 0, h: float = 1e-6) -> float:
    """Worst relative error of separation_gradient against central differences in a tangent basis."""
    rng = np.random.default_rng(seed)
    field = scenario.field
    worst = 0.0
    per = max(1, count // max(1, len(field)))
    for obs in field:
        pts, _, _ = tube_samples(obs, per, scenario.delta_u, rng, min_distance=1e-3)
        for x in pts:
            g = separation_gradient(field, x)
            B = tangent_basis(x)
            fd = np.array([
                (separation_spherical(field, _retract(x, h * b)) - separation_spherical(field, _retract(x, -h * b))) / (2 * h)
                for b in B.T
            ])
            worst = max(worst, float(np.linalg.norm(fd - B.T @ g) / np.linalg.norm(g)))
    return worst


def ambient_nu(scenario, y) -> np.ndarray:
    """P(y) v_d evaluated off the sphere with d(y) = arccos(y . Pi), Pi from the closest-point solver."""
    y = np.asarray(y, dtype=float)
    yh = y / np.linalg.norm(y)
    planner, field = scenario.planner, scenario.field
    vd = desired_field(planner, field, yh)
    if len(field):
        d_all = obstacle_distances(field, yh)
        i = int(np.argmin(d_all))
        if d_all[i] <= planner.eps:
            pi = closest_point(field[i], yh)
            d = math.acos(max(-1.0, min(1.0, float(y @ pi))))
            s = d / planner.eps
            a = s**3 * (6 * s * s - 15 * s + 10)
            g = field[i].kernel
            vd = planner.k1 * (a * planner.target - (1 - a) * g / planner.kappa)
    return vd - y * (y @ vd)


def jacobian_fd_error(scenario, count: int = 1000, seed: int = 0, h: float = 1e-6, min_distance: float = 1e-3) -> float:
    """Worst relative error (Frobenius) of jacobian_jd against central differences of ambient_nu.

    Half of the samples come from the obstacle tubes so the blended branch is exercised.
    The off-sphere extension arccos(y . Pi) is singular once |y| cos d reaches 1,
    i.e. a radial offset of about d^2 / 2, so the step shrinks with d^2.
    """
    rng = np.random.default_rng(seed)
    field = scenario.field
    pts = []
    if len(field):
        per = max(1, count // (2 * len(field)))
        for obs in field:
            tp, _, _ = tube_samples(obs, per, scenario.planner.eps * 1.2, rng, min_distance=min_distance)
            pts.extend(tp)
    while len(pts) < count:
        x = random_points(rng, 1, scenario.dim)[0]
        if not len(field) or obstacle_distances(field, x).min() > min_distance:
            pts.append(x)
    worst = 0.0
    n1 = scenario.dim
    for x in pts[:count]:
        dmin = obstacle_distances(field, x).min() if len(field) else math.inf
        if dmin <= min_distance:
            continue
        J = jacobian_jd(scenario.planner, field, x)
        hx = min(h, 0.01 * dmin * dmin)
        fd = np.empty((n1, n1))
        for k in range(n1):
            e = np.zeros(n1)
            e[k] = hx
            fd[:, k] = (ambient_nu(scenario, x + e) - ambient_nu(scenario, x - e)) / (2 * hx)
        worst = max(worst, float(np.linalg.norm(fd - J) / max(np.linalg.norm(J), 1e-12)))
    return worst


def beta_knot_error(scenario, h: float = 1e-5) -> float:
    """Largest jump in value or one-sided slope of beta across eps1 and eps2.

    Slopes use third-order one-sided stencils: the bridge has a large third
    derivative near eps2, which a second-order stencil turns into ~1e-6 of
    truncation error.
    """
    ctrl = scenario.controller
    worst = 0.0
    for knot in (ctrl.eps1, ctrl.eps2):
        b0 = beta(ctrl, knot)
        fl = [beta(ctrl, knot - k * h) for k in (1, 2, 3)]
        fr = [beta(ctrl, knot + k * h) for k in (1, 2, 3)]
        left = (11 * b0 - 18 * fl[0] + 9 * fl[1] - 2 * fl[2]) / (6 * h)
        right = (-11 * b0 + 18 * fr[0] - 9 * fr[1] + 2 * fr[2]) / (6 * h)
        jump = abs(beta(ctrl, knot * (1 + 1e-15)) - beta(ctrl, knot * (1 - 1e-15)))
        worst = max(worst, jump, abs(left - right))
    return worst


def speed_bound_excess(scenario, count: int = 10_000, seed: int = 0) -> float:
    """max |nu_d| - k1 (1 + 1/kappa) over free-space samples (should be <= 0)."""
    rng = np.random.default_rng(seed)
    bound = scenario.planner.k1 * (1 + 1 / scenario.planner.kappa)
    worst = -math.inf
    for x in random_points(rng, count, scenario.dim):
        if len(scenario.field) and obstacle_distances(scenario.field, x).min() <= 0:
            continue
        worst = max(worst, float(np.linalg.norm(nu_d(scenario.planner, scenario.field, x))) - bound)
    return worst


def run_checks(scenario, samples: int = 300, grid: int = 2000) -> list[CheckResult]:
    out: list[CheckResult] = []

    def guarded(name, fn, threshold, ok):
        try:
            value, detail = fn()
            out.append(CheckResult(name, bool(ok(value)), value, threshold, detail))
        except SphereCtlError as exc:
            out.append(CheckResult(name, False, math.nan, threshold, f"error: {exc}"))

    if len(scenario.field):
        guarded("separation gradient vs FD", lambda: (gradient_fd_error(scenario, samples), ""), 1e-5, lambda v: v < 1e-5)
    guarded("planner Jacobian vs FD", lambda: (jacobian_fd_error(scenario, samples), ""), 1e-4, lambda v: v < 1e-4)
    guarded("beta C1 at knots", lambda: (beta_knot_error(scenario), ""), 1e-6, lambda v: v < 1e-6)
    guarded("|nu_d| <= k1 (1 + 1/kappa)", lambda: (speed_bound_excess(scenario, samples * 10), ""), 0.0, lambda v: v <= 1e-12)
    for i, obs in enumerate(scenario.field):
        rep = validate_assumption2(obs, scenario.delta_u, samples=samples * 4)
        out.append(CheckResult(f"obstacle {i} kernel visibility", rep.ok, rep.worst_margin, 0.0))
        ok, margin = check_projection_uniqueness(obs, scenario.delta_u, samples=samples)
        out.append(CheckResult(f"obstacle {i} unique projection", ok, margin, 0.0))
    if len(scenario.field):
        mu = estimate_mu(scenario, 0.5 * scenario.controller.eps1, samples=samples * 4)
        out.append(CheckResult("tube outflow mu estimate", mu > 0, mu, 0.0))
    try:
        reports = find_equilibria(scenario, grid)
    except SphereCtlError as exc:
        out.append(CheckResult("equilibrium search", False, math.nan, 0.0, f"error: {exc}"))
        return out
    has_target = any(r.classification == "target" for r in reports)
    out.append(CheckResult("target classified stable", has_target, float(len(reports)), 0.0, f"{len(reports)} equilibria"))
    for r in reports:
        ec = eigenstructure_check(scenario, r.x_star)
        worst = max([ec.zero_residual] + ec.tangent_pair_residuals)
        label = f"eigenstructure {r.classification} " + np.array2string(r.x_star, precision=3)
        detail = f"multiplicity {ec.damping_multiplicity}/{ec.expected_multiplicity}, |J x*| {ec.jx_residual:.1e}"
        out.append(CheckResult(label, ec.passed(), worst, 1e-8, detail))
    return out
