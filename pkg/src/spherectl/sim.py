"""Closed-loop simulation of x' = P(x) v, v' = u(x, v) with runtime monitors.

Integration is classical RK4 at a fixed step ``h`` with ``x`` renormalized
after every step.  Stage evaluations use ``x / |x|``, so the vector field is
the radially constant extension of the one on the sphere and the tracking
error obeys its exact decay law at every stage.

Near the unsafe set the damping ``kd * beta`` grows like ``1/d``; when
``kd * beta * h`` or the per-step travel relative to ``d`` gets large the
step is split into equal substeps so RK4 stays inside its stability region.
Substeps also end where the state crosses a knot of the damping schedule or
the tube edge, since the control is only C^1 across those surfaces.
Monitors and logs still run on the ``h`` grid.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np
from numba import njit

from .controller import _control_eval
from .errors import (
    BoundaryContactError,
    ConfigurationError,
    InfeasibleStateError,
    InputError,
    NumericalBlowupError,
    SphereCtlError,
)
from .geometry import as_point
from .planner import BLOWUP, CONTACT, NEAR_BOUNDARY, OK, TWO_TUBES

STATUS_NAMES = {
    OK: "ok",
    CONTACT: "contact",
    NEAR_BOUNDARY: "near_boundary",
    TWO_TUBES: "two_tubes",
    BLOWUP: "blowup",
}

LOG_COLUMNS_TAIL = ("d_U", "norm_u", "norm_v_err", "V")


@dataclass(frozen=True, eq=False)
class SimState:
    """Composite state: unit ``x`` and ambient (unprojected) velocity ``v``."""

    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        x = as_point(self.x)
        v = np.asarray(self.v, dtype=np.float64).copy()
        if v.shape != x.shape:
            raise InputError(f"v has shape {v.shape}, expected {x.shape}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)


@dataclass(frozen=True)
class SimConfig:
    """Step size ``h``, horizon, and monitor settings.

    ``clearance`` is the separation level used for the eventual-clearance
    time (defaults to eps1 / 2 of the scenario); ``log_every`` thins the
    stored trajectory without affecting the monitors.

    With ``substep`` on, a step is split whenever ``kd beta h`` exceeds
    ``stiff_limit`` or the step would travel more than ``travel_limit`` times
    the current separation.  Substeps never go below ``h / max_substeps``.

    ``locate_knots`` ends a substep where the state crosses eps1, eps2 or the
    tube edge eps.  The control is only C^1 there, and an RK4 step that
    straddles such a surface drops to third-order local accuracy.
    """

    h: float = 1e-3
    horizon: float = 60.0
    renorm: bool = True
    log_every: int = 1
    monotone_slack: float = 1e-9
    clearance: float | None = None
    substep: bool = True
    stiff_limit: float = 0.5
    travel_limit: float = 0.25
    max_substeps: int = 65536
    locate_knots: bool = True

    def __post_init__(self):
        if not 0 < self.h <= 1e-2:
            raise InputError(f"step h={self.h} must lie in (0, 1e-2]")
        if self.horizon < 0:
            raise InputError("horizon must be non-negative")
        if self.horizon / self.h > 1e7:
            raise InputError(f"horizon/h = {self.horizon / self.h:.3g} exceeds the 1e7 step guard")
        if self.log_every < 1:
            raise InputError("log_every must be >= 1")

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.h))


@dataclass
class Trajectory:
    """Logged samples plus per-run monitor summary.

    ``log`` has columns t, x[0..n], v[0..n], d_U, norm_u, norm_v_err, V.
    """

    log: np.ndarray
    dim: int
    status: str = "ok"
    message: str = ""
    steps: int = 0
    min_separation: float = math.inf
    max_control: float = 0.0
    max_v_increase: float = -math.inf
    monotone_violations: int = 0
    clearance_time: float = 0.0
    max_substeps: int = 1
    final: SimState | None = None
    extras: dict = dc_field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def times(self) -> np.ndarray:
        return self.log[:, 0]

    @property
    def x(self) -> np.ndarray:
        return self.log[:, 1 : 1 + self.dim]

    @property
    def v(self) -> np.ndarray:
        return self.log[:, 1 + self.dim : 1 + 2 * self.dim]

    @property
    def d_U(self) -> np.ndarray:
        return self.log[:, 1 + 2 * self.dim]

    @property
    def norm_u(self) -> np.ndarray:
        return self.log[:, 2 + 2 * self.dim]

    @property
    def norm_v_err(self) -> np.ndarray:
        return self.log[:, 3 + 2 * self.dim]

    @property
    def V(self) -> np.ndarray:
        return self.log[:, 4 + 2 * self.dim]

    @property
    def states(self) -> list[SimState]:
        return [SimState(x, v) for x, v in zip(self.x, self.v)]

    @staticmethod
    def columns(dim: int) -> list[str]:
        return ["t"] + [f"x{i}" for i in range(dim)] + [f"v{i}" for i in range(dim)] + list(LOG_COLUMNS_TAIL)


# ---------------------------------------------------------------------------
# compiled integrator
# ---------------------------------------------------------------------------


@njit(cache=True)
def _rhs(F, PP, CP, x, v, dx, dv, nu, xh, cut):
    nx = 0.0
    for k in range(x.shape[0]):
        nx += x[k] * x[k]
    nx = math.sqrt(nx)
    for k in range(x.shape[0]):
        xh[k] = x[k] / nx
    status, dvar, dmin, beta = _control_eval(F, PP, CP, xh, v, dv, nu, cut)
    xv = 0.0
    for k in range(x.shape[0]):
        xv += xh[k] * v[k]
    for k in range(x.shape[0]):
        dx[k] = v[k] - xh[k] * xv
    return status, dvar, dmin, beta


@njit(cache=True)
def _rk4(F, PP, CP, x, v, h, k1x, k1v, renorm, cut):
    """One RK4 step given the first-stage slopes; updates x, v in place."""
    n1 = x.shape[0]
    nu = np.empty(n1)
    xh = np.empty(n1)
    xs = np.empty(n1)
    vs = np.empty(n1)
    ax = k1x.copy()
    av = k1v.copy()
    kx = np.empty(n1)
    kv = np.empty(n1)
    weights = (0.5, 0.5, 1.0)
    sums = (2.0, 2.0, 1.0)
    px = k1x
    pv = k1v
    for stage in range(3):
        c = weights[stage] * h
        for k in range(n1):
            xs[k] = x[k] + c * px[k]
            vs[k] = v[k] + c * pv[k]
        status, _, _, _ = _rhs(F, PP, CP, xs, vs, kx, kv, nu, xh, cut)
        if status == CONTACT or status == TWO_TUBES:
            return status
        for k in range(n1):
            ax[k] += sums[stage] * kx[k]
            av[k] += sums[stage] * kv[k]
        px = kx.copy()
        pv = kv.copy()
    for k in range(n1):
        x[k] += h / 6.0 * ax[k]
        v[k] += h / 6.0 * av[k]
    if renorm:
        nx = 0.0
        for k in range(n1):
            nx += x[k] * x[k]
        nx = math.sqrt(nx)
        for k in range(n1):
            x[k] /= nx
    return OK


@njit(cache=True)
def _regime(PP, CP, dvar, dmin):
    """Which side of eps1, eps2 and the tube edge eps the state is on."""
    r = 0
    if dvar > CP.eps1:
        r += 1
    if dvar >= CP.eps2:
        r += 2
    if dmin > PP.eps:
        r += 4
    return r


@njit(cache=True, nogil=True)
def _run(F, PP, CP, x0, v0, h, nsteps, stride, renorm, slack, clear_thr,
         substep, stiff_limit, travel_limit, max_sub, locate, cut, log):
    n1 = x0.shape[0]
    x = x0.copy()
    v = v0.copy()
    dx = np.empty(n1)
    dv = np.empty(n1)
    nu = np.empty(n1)
    xh = np.empty(n1)
    # returns (status, steps done, min separation, max |u|, max V increase,
    #          slack violations, last time below clearance, max substeps, log rows)
    status, dvar, dmin, beta = _rhs(F, PP, CP, x, v, dx, dv, nu, xh, np.inf)
    if status == CONTACT or status == TWO_TUBES:
        return status, 0, dvar, 0.0, -np.inf, 0, np.inf, 0, 0
    zz = 0.0
    uu = 0.0
    for k in range(n1):
        zz += (v[k] - nu[k]) ** 2
        uu += dv[k] * dv[k]
    V = 0.5 * zz
    min_d = dvar
    max_u = math.sqrt(uu)
    max_inc = -np.inf
    violations = 0
    last_below = -1.0 if dvar >= clear_thr else 0.0
    sub_max = 1
    log[0, 0] = 0.0
    for k in range(n1):
        log[0, 1 + k] = x[k]
        log[0, 1 + n1 + k] = v[k]
    log[0, 1 + 2 * n1] = dvar
    log[0, 2 + 2 * n1] = max_u
    log[0, 3 + 2 * n1] = math.sqrt(zz)
    log[0, 4 + 2 * n1] = V
    nlog = 1
    done = 0
    hmin = h / max_sub
    x0s = np.empty(n1)
    v0s = np.empty(n1)
    reg = _regime(PP, CP, dvar, dmin)
    for step in range(nsteps):
        # substeps are sized from the current state before each one, and a
        # stage that leaves the free space is retried with a quarter step
        left = h
        nsub = 0
        while left > 1e-12 * h:
            hs = left
            if substep:
                speed = 0.0
                for k in range(n1):
                    speed += dx[k] * dx[k]
                r = max(CP.kd * beta * hs / stiff_limit, math.sqrt(speed) * hs / (travel_limit * dmin))
                if r > 1.0:
                    hs = max(left / math.ceil(r), hmin)
            x0s[:] = x
            v0s[:] = v
            k1x = dx.copy()
            k1v = dv.copy()
            while True:
                status = _rk4(F, PP, CP, x, v, min(hs, left), k1x, k1v, renorm, cut)
                if status == OK or not substep or hs <= hmin:
                    break
                hs = max(0.25 * hs, hmin)
            if status != OK:
                break
            taken = min(hs, left)
            status, dvar, dmin, beta = _rhs(F, PP, CP, x, v, dx, dv, nu, xh, cut)
            if locate and status != CONTACT and status != TWO_TUBES and _regime(PP, CP, dvar, dmin) != reg:
                # end the step just past the knot so no RK4 step straddles it
                lo = 0.0
                hi = 1.0
                while (hi - lo) * taken > 1e-9 * h:
                    mid = 0.5 * (lo + hi)
                    x[:] = x0s
                    v[:] = v0s
                    st = _rk4(F, PP, CP, x, v, mid * taken, k1x, k1v, renorm, cut)
                    same = False
                    if st == OK:
                        st, dvar, dmin, beta = _rhs(F, PP, CP, x, v, dx, dv, nu, xh, cut)
                        same = st != CONTACT and st != TWO_TUBES and _regime(PP, CP, dvar, dmin) == reg
                    if same:
                        lo = mid
                    else:
                        hi = mid
                x[:] = x0s
                v[:] = v0s
                taken = hi * taken
                status = _rk4(F, PP, CP, x, v, taken, k1x, k1v, renorm, cut)
                if status != OK:
                    break
                status, dvar, dmin, beta = _rhs(F, PP, CP, x, v, dx, dv, nu, xh, cut)
            if status == CONTACT or status == TWO_TUBES:
                break
            reg = _regime(PP, CP, dvar, dmin)
            left -= taken
            nsub += 1
        if nsub > sub_max:
            sub_max = nsub
        t = (step + 1) * h
        if status == CONTACT or status == TWO_TUBES:
            return status, step, min_d, max_u, max_inc, violations, last_below, sub_max, nlog
        # the monitors need the exact separation only on logged rows or when
        # it could undercut the running minimum
        logged = (step + 1) % stride == 0 or step + 1 == nsteps
        diag_cut = np.inf if logged else max(cut, min_d)
        status, dvar, dmin, beta = _rhs(F, PP, CP, x, v, dx, dv, nu, xh, diag_cut)
        if status == CONTACT or status == TWO_TUBES:
            return status, step + 1, min(min_d, dvar), max_u, max_inc, violations, last_below, sub_max, nlog
        zz = 0.0
        uu = 0.0
        finite = True
        for k in range(n1):
            zz += (v[k] - nu[k]) ** 2
            uu += dv[k] * dv[k]
            if not (math.isfinite(x[k]) and math.isfinite(v[k])):
                finite = False
        if not finite or not math.isfinite(uu):
            return BLOWUP, step + 1, min_d, max_u, max_inc, violations, last_below, sub_max, nlog
        Vn = 0.5 * zz
        inc = Vn - V
        if inc > max_inc:
            max_inc = inc
        if inc > slack:
            violations += 1
        V = Vn
        if dvar < min_d:
            min_d = dvar
        un = math.sqrt(uu)
        if un > max_u:
            max_u = un
        if dvar < clear_thr:
            last_below = t
        done = step + 1
        if logged:
            log[nlog, 0] = t
            for k in range(n1):
                log[nlog, 1 + k] = x[k]
                log[nlog, 1 + n1 + k] = v[k]
            log[nlog, 1 + 2 * n1] = dvar
            log[nlog, 2 + 2 * n1] = un
            log[nlog, 3 + 2 * n1] = math.sqrt(zz)
            log[nlog, 4 + 2 * n1] = Vn
            nlog += 1
    return status, done, min_d, max_u, max_inc, violations, last_below, sub_max, nlog


# ---------------------------------------------------------------------------
# Python API
# ---------------------------------------------------------------------------


def _packs(scenario):
    ctrl = scenario.controller
    if ctrl.phi is not None:
        raise ConfigurationError("the compiled simulator supports only the default beta bridge")
    return scenario.field.pack, scenario.planner.packed_for(ctrl.separation), ctrl.pack


def _as_state(xi) -> SimState:
    if isinstance(xi, SimState):
        return xi
    x, v = xi
    return SimState(x, v)


def step(scenario, state, h: float) -> SimState:
    """One RK4 step of the closed loop, followed by renormalization of x."""
    state = _as_state(state)
    F, PP, CP = _packs(scenario)
    x = state.x.copy()
    v = state.v.copy()
    n1 = x.shape[0]
    dx, dv, nu, xh = (np.empty(n1) for _ in range(4))
    status, dvar, _, _ = _rhs(F, PP, CP, x, v, dx, dv, nu, xh, np.inf)
    if status == CONTACT:
        raise BoundaryContactError(f"state is on or inside the unsafe set (separation {dvar:.3g})")
    if status == TWO_TUBES:
        raise ConfigurationError("state lies in two obstacle tubes")
    status = _rk4(F, PP, CP, x, v, float(h), dx, dv, True, scenario.controller.flat_distance)
    if status == CONTACT:
        raise BoundaryContactError("an RK4 stage left the free space; reduce h")
    if status == TWO_TUBES:
        raise ConfigurationError("an RK4 stage entered two obstacle tubes")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
        raise NumericalBlowupError(f"non-finite state after step of size {h}")
    return SimState(x, v)


def simulate(scenario, xi0, config: SimConfig | None = None) -> Trajectory:
    """Integrate from ``xi0`` until the horizon or the first monitor trip.

    Safety trips and blowups end the run and are reported through
    ``Trajectory.status``; they do not raise.
    """
    config = config or SimConfig()
    state = _as_state(xi0)
    if state.x.shape[0] != scenario.field.dim:
        raise InputError("initial state dimension does not match the scenario")
    F, PP, CP = _packs(scenario)
    nsteps = config.steps
    stride = config.log_every
    nrows = nsteps // stride + 2
    n1 = state.x.shape[0]
    log = np.zeros((nrows, 5 + 2 * n1))
    clear = config.clearance if config.clearance is not None else 0.5 * scenario.controller.eps1
    res = _run(F, PP, CP, state.x, state.v, float(config.h), nsteps, stride, bool(config.renorm),
               float(config.monotone_slack), float(clear), bool(config.substep),
               float(config.stiff_limit), float(config.travel_limit), int(config.max_substeps),
               bool(config.locate_knots), float(scenario.controller.flat_distance), log)
    status, done, min_d, max_u, max_inc, violations, last_below, sub_max, nlog = res
    if nlog == 0:
        raise InfeasibleStateError(f"initial state is not admissible ({STATUS_NAMES[int(status)]}, separation {min_d:.3g})")
    log = log[:nlog]
    name = STATUS_NAMES[int(status)]
    if name == "near_boundary":
        # the Jacobian guard is a diagnostic only; the run itself is fine
        name = "ok"
    message = ""
    if name != "ok":
        message = f"{name} at t={done * config.h:.6g} after {done} steps"
    final = SimState(log[-1, 1 : 1 + n1], log[-1, 1 + n1 : 1 + 2 * n1]) if nlog else None
    return Trajectory(
        log=log,
        dim=n1,
        status=name,
        message=message,
        steps=int(done),
        min_separation=float(min_d),
        max_control=float(max_u),
        max_v_increase=float(max_inc),
        monotone_violations=int(violations),
        clearance_time=max(0.0, float(last_below)) if last_below >= 0 else 0.0,
        max_substeps=int(sub_max),
        final=final,
    )


def thread_cap() -> int:
    """Worker count for batch runs: SPHERECTL_THREADS if set, else the CPU count."""
    raw = os.environ.get("SPHERECTL_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise InputError(f"SPHERECTL_THREADS={raw!r} is not an integer") from None
    return max(1, os.cpu_count() or 1)


def _failed(exc: Exception, dim: int) -> Trajectory:
    kind = "infeasible" if isinstance(exc, (SphereCtlError, ValueError)) else "error"
    return Trajectory(log=np.zeros((0, 5 + 2 * dim)), dim=dim, status=kind, message=str(exc))


def batch_simulate(scenario, seeds, config: SimConfig | None = None, threads: int | None = None) -> list[Trajectory]:
    """Run independent trajectories; output order follows ``seeds``.

    A seed that cannot be simulated yields a Trajectory with status
    ``infeasible`` instead of aborting the batch.
    """
    config = config or SimConfig()
    dim = scenario.field.dim

    def one(xi):
        try:
            return simulate(scenario, xi, config)
        except (SphereCtlError, ValueError) as exc:
            return _failed(exc, dim)

    seeds = list(seeds)
    workers = min(threads or thread_cap(), max(1, len(seeds)))
    if workers == 1:
        return [one(xi) for xi in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, seeds))
