"""Equilibria of the projected field and the linearization of the closed loop.

Equilibria of the closed loop are the points (x*, 0) with nu_d(x*) = 0.
They are located by damped Newton on the tangent residual, started from a
dense point set and retracted onto the sphere after every update.

Linearizations use the intrinsic Jacobian ``J = J_d P`` (the differential of
``nu_d`` along the sphere).  It annihilates x* at every equilibrium, which is
what makes the block eigenstructure of the closed loop exact.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .controller import beta as beta_fn
from .controller import control
from .errors import InfeasibleStateError, InputError, SphereCtlError
from .geometry import fibonacci_sphere, projection_matrix, random_points, sphere_angle, tangent_basis
from .obstacle import SEPARATIONS, obstacle_distances, tube_samples
from .planner import OK, _evaluate, nu_d, tangent_jacobian

log = logging.getLogger(__name__)

DEDUP_ANGLE = 1e-6
TANGENCY_TOL = 1e-6
INDETERMINATE_BAND = 1e-8
RESIDUAL_TOL = 1e-9


@dataclass
class EquilibriumReport:
    x_star: np.ndarray
    residual: float
    spectrum: np.ndarray  # eigenvalues of the closed-loop Jacobian
    tangent_eigenvalues: np.ndarray  # spectrum of J_d restricted to the tangent space
    eigvec_tangent: np.ndarray  # per closed-loop eigenvalue: is the x-part tangent at x*
    classification: str
    starts: int = 0
    jx_residual: float = 0.0
    separation: float = math.inf
    beta: float = 1.0
    notes: list = dc_field(default_factory=list)

    def as_record(self) -> dict:
        return {
            "x_star": [float(c) for c in self.x_star],
            "classification": self.classification,
            "residual": self.residual,
            "jx_residual": self.jx_residual,
            "separation": None if math.isinf(self.separation) else self.separation,
            "beta": self.beta,
            "starts": self.starts,
            "tangent_eigenvalues": [[float(z.real), float(z.imag)] for z in self.tangent_eigenvalues],
            "spectrum": [[float(z.real), float(z.imag)] for z in self.spectrum],
        }


def _residual(scenario, x) -> float | None:
    ev = _evaluate(scenario.planner, scenario.field, x)
    if ev.status not in (OK,):
        return None
    r = ev.vd - x * (x @ ev.vd)
    return float(np.linalg.norm(r))


def newton_equilibrium(scenario, x0, max_iter: int = 60, tol: float = 1e-13, max_step: float = 0.5):
    """Damped Newton on nu_d(x) = 0 restricted to the tangent space.

    Returns (x, residual) or None when the start fails (leaves the free space,
    stalls, or runs out of iterations).
    """
    x = np.asarray(x0, dtype=float)
    x = x / np.linalg.norm(x)
    f = _residual(scenario, x)
    if f is None:
        return None
    for _ in range(max_iter):
        if f < tol:
            return x, f
        try:
            J = tangent_jacobian(scenario.planner, scenario.field, x)
        except SphereCtlError:
            return None
        B = tangent_basis(x)
        r = nu_d(scenario.planner, scenario.field, x)
        M = B.T @ J @ B
        try:
            y = np.linalg.solve(M, -B.T @ r)
        except np.linalg.LinAlgError:
            y = np.linalg.lstsq(M, -B.T @ r, rcond=None)[0]
        step = B @ y
        length = np.linalg.norm(step)
        if length > max_step:
            step *= max_step / length
        t = 1.0
        while t > 1e-8:
            xn = x + t * step
            xn /= np.linalg.norm(xn)
            fn = _residual(scenario, xn)
            if fn is not None and fn < (1.0 - 1e-4 * t) * f:
                break
            t *= 0.5
        else:
            return (x, f) if f < RESIDUAL_TOL else None
        x, f = xn, fn
    return (x, f) if f < RESIDUAL_TOL else None


def _starts(scenario, grid_density: int, seed: int) -> np.ndarray:
    if scenario.dim == 3:
        pts = fibonacci_sphere(grid_density)
    else:
        pts = random_points(np.random.default_rng(seed), grid_density, scenario.dim)
    if len(scenario.field):
        keep = [i for i, p in enumerate(pts) if obstacle_distances(scenario.field, p).min() > 0]
        pts = pts[keep]
    return pts


def _beta_at(scenario, x) -> tuple[float, float]:
    ctrl = scenario.controller
    if not len(scenario.field):
        return math.inf, 1.0
    d = SEPARATIONS[ctrl.separation](scenario.field, x)
    return d, beta_fn(ctrl, d)


def closed_loop_jacobian(scenario, x_star, tol: float = RESIDUAL_TOL) -> np.ndarray:
    """Linearization of (x, v) -> (P(x) v, u(x, v)) at (x*, 0).

    [[0, P], [kd beta J, J P - kd beta I]] with J the intrinsic Jacobian of nu_d.
    """
    x = np.asarray(x_star, dtype=float)
    x = x / np.linalg.norm(x)
    res = _residual(scenario, x)
    if res is None:
        raise InfeasibleStateError("x_star is not in the free space")
    if res > tol:
        raise InputError(f"x_star is not an equilibrium: |nu_d| = {res:.3g} > {tol:g}")
    n1 = x.shape[0]
    P = projection_matrix(x)
    J = tangent_jacobian(scenario.planner, scenario.field, x)
    _, b = _beta_at(scenario, x)
    g = scenario.controller.kd * b
    top = np.hstack([np.zeros((n1, n1)), P])
    bottom = np.hstack([g * J, J @ P - g * np.eye(n1)])
    return np.vstack([top, bottom])


def closed_loop_field(scenario, x, v) -> np.ndarray:
    """The simulated vector field (P(x/|x|) v, u(x/|x|, v)) as one stacked vector."""
    xh = np.asarray(x, dtype=float)
    xh = xh / np.linalg.norm(xh)
    u = control(scenario.controller, scenario.planner, scenario.field, (xh, v))
    return np.concatenate([v - xh * (xh @ v), u])


def tangent_spectrum(scenario, x_star) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and ambient eigenvectors (columns) of J_d restricted to T_x* S^n."""
    x = np.asarray(x_star, dtype=float)
    x = x / np.linalg.norm(x)
    B = tangent_basis(x)
    J = tangent_jacobian(scenario.planner, scenario.field, x)
    lam, Y = np.linalg.eig(B.T @ J @ B)
    return lam, B @ Y


def classify_equilibrium(scenario, report: EquilibriumReport) -> str:
    """target / stable / unstable from the tangent spectrum; indeterminate near the imaginary axis."""
    lam = np.asarray(report.tangent_eigenvalues)
    if lam.size and np.any(np.abs(lam.real) < INDETERMINATE_BAND):
        return "indeterminate"
    if np.any(lam.real > 0):
        return "unstable"
    if sphere_angle(report.x_star, scenario.target) < DEDUP_ANGLE:
        return "target"
    return "stable"


def analyze_point(scenario, x_star, starts: int = 0) -> EquilibriumReport:
    x = np.asarray(x_star, dtype=float)
    x = x / np.linalg.norm(x)
    res = _residual(scenario, x)
    Jcl = closed_loop_jacobian(scenario, x)
    spectrum, vecs = np.linalg.eig(Jcl)
    n1 = x.shape[0]
    xpart = vecs[:n1]
    norms = np.linalg.norm(vecs, axis=0)
    eig_tangent = np.abs(x @ xpart) / np.where(norms > 0, norms, 1.0) < TANGENCY_TOL
    lam, _ = tangent_spectrum(scenario, x)
    J = tangent_jacobian(scenario.planner, scenario.field, x)
    d, b = _beta_at(scenario, x)
    rep = EquilibriumReport(
        x_star=x,
        residual=float(res),
        spectrum=spectrum,
        tangent_eigenvalues=lam,
        eigvec_tangent=eig_tangent,
        classification="",
        starts=starts,
        jx_residual=float(np.linalg.norm(J @ x)),
        separation=float(d),
        beta=float(b),
    )
    rep.classification = classify_equilibrium(scenario, rep)
    return rep


def find_equilibria(scenario, grid_density: int = 2000, seed: int = 0) -> list[EquilibriumReport]:
    """All equilibria reached by Newton from a dense start set, deduplicated.

    The target is always included.  Reports are ordered target first, then by
    their coordinates.
    """
    if grid_density < 1000:
        raise InputError("grid_density must be at least 1000")
    found: list[list] = []  # [x, residual, count]
    failed = 0
    for p in _starts(scenario, grid_density, seed):
        out = newton_equilibrium(scenario, p)
        if out is None:
            failed += 1
            continue
        x, f = out
        for entry in found:
            if sphere_angle(entry[0], x) < DEDUP_ANGLE:
                entry[2] += 1
                if f < entry[1]:
                    entry[0], entry[1] = x, f
                break
        else:
            found.append([x, f, 1])
    if failed:
        log.info("discarded %d Newton starts that did not converge", failed)
    target = scenario.target
    if not any(sphere_angle(e[0], target) < DEDUP_ANGLE for e in found):
        found.append([target.copy(), 0.0, 0])
    reports = [analyze_point(scenario, x, count) for x, _, count in found]
    reports.sort(key=lambda r: (r.classification != "target", tuple(np.round(-r.x_star, 9))))
    return reports


@dataclass
class EigenCheck:
    """Residuals of the block eigenstructure of the closed loop at one equilibrium."""

    damping_multiplicity: int  # dimension of the null space of J_cl + kd beta I
    expected_multiplicity: int
    zero_residual: float  # |J_cl [x*; 0]|
    tangent_pair_residuals: list  # |J_cl n - lambda n| / |n| for n = [P n2 / lambda; n2]
    jx_residual: float

    def passed(self, tol: float = 1e-8, fact_tol: float = 1e-6) -> bool:
        return (
            self.damping_multiplicity >= self.expected_multiplicity
            and self.zero_residual < tol
            and all(r < tol for r in self.tangent_pair_residuals)
            and self.jx_residual < fact_tol
        )


def eigenstructure_check(scenario, x_star, tol: float = 1e-8) -> EigenCheck:
    x = np.asarray(x_star, dtype=float)
    x = x / np.linalg.norm(x)
    n1 = x.shape[0]
    Jcl = closed_loop_jacobian(scenario, x)
    _, b = _beta_at(scenario, x)
    g = scenario.controller.kd * b
    sv = np.linalg.svd(Jcl + g * np.eye(2 * n1), compute_uv=False)
    nullity = int(np.sum(sv < tol * max(1.0, sv[0])))
    zero = float(np.linalg.norm(Jcl @ np.concatenate([x, np.zeros(n1)])))
    lam, N2 = tangent_spectrum(scenario, x)
    P = projection_matrix(x)
    pairs = []
    for k, lg in enumerate(lam):
        n2 = N2[:, k]
        vec = np.concatenate([P @ n2 / lg, n2])
        pairs.append(float(np.linalg.norm(Jcl @ vec - lg * vec) / np.linalg.norm(vec)))
    J = tangent_jacobian(scenario.planner, scenario.field, x)
    return EigenCheck(nullity, n1, zero, pairs, float(np.linalg.norm(J @ x)))


def estimate_mu(scenario, delta_d: float, samples: int = 2000, seed: int = 0) -> float:
    """Smallest observed grad(d) . nu_d over tube points with 0 < d <= delta_d.

    The gradient of the spherical distance is the outward normal, which the
    tube construction provides without a closest-point solve.
    """
    rng = np.random.default_rng(seed)
    worst = math.inf
    per = max(1, samples // max(1, len(scenario.field)))
    for obs in scenario.field:
        pts, closest, _ = tube_samples(obs, per, delta_d, rng)
        for x, pi in zip(pts, closest):
            if obstacle_distances(scenario.field, x).min() <= 0:
                continue
            n = projection_matrix(x) @ (x - pi)
            n /= np.linalg.norm(n)
            worst = min(worst, float(n @ nu_d(scenario.planner, scenario.field, x)))
    return worst
