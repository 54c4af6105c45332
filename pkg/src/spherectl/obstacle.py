"""Star-shaped unsafe sets on the sphere and the separation functions built on them.

An obstacle is described by a kernel point ``g`` and a radial profile: the
angular extent rho(psi) of the set measured from ``g`` along the great circle
leaving ``g`` in tangent direction ``cos(psi) e1 + sin(psi) e2``.  Every such
set is star-shaped about ``g`` by construction, and the boundary is smooth
whenever the profile is (a truncated Fourier series here).

On S^2 the full Fourier profile is supported.  For higher dimensions only
spherical caps (constant extent) are available.

The numerically heavy routines are numba kernels operating on a
:class:`FieldPack`; the Python functions below are convenience wrappers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
from numba import njit

from .errors import (
    AmbiguousClosestPointWarning,
    InfeasibleStateError,
    InputError,
)
from .geometry import _angle, as_point, projection_matrix, reference_frame

TWO_PI = 2.0 * math.pi
RHO_MIN = 1e-3
RHO_MARGIN = 1e-3
DEFAULT_GRID = 720
NEWTON_TOL = 1e-14


class InfeasibleStateWarning(UserWarning):
    """A separation was evaluated at a point inside the unsafe set."""


@dataclass(frozen=True)
class RadialProfile:
    """Angular extent rho(psi) = a0 + sum_k a_k cos(k psi) + b_k sin(k psi)."""

    a0: float
    a: tuple = ()
    b: tuple = ()

    def __post_init__(self):
        a = tuple(float(c) for c in self.a)
        b = tuple(float(c) for c in self.b)
        size = max(len(a), len(b))
        a = a + (0.0,) * (size - len(a))
        b = b + (0.0,) * (size - len(b))
        object.__setattr__(self, "a0", float(self.a0))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def cap(cls, radius: float) -> "RadialProfile":
        return cls(radius)

    @property
    def is_cap(self) -> bool:
        return not any(self.a) and not any(self.b)

    @property
    def order(self) -> int:
        return len(self.a)

    def amplitude_bound(self) -> float:
        return float(sum(math.hypot(ak, bk) for ak, bk in zip(self.a, self.b)))

    def upper_bound(self) -> float:
        """Rigorous upper bound on rho over all directions."""
        return self.a0 + self.amplitude_bound()

    def __call__(self, psi):
        psi = np.asarray(psi, dtype=np.float64)
        out = np.full(psi.shape, self.a0)
        for k, (ak, bk) in enumerate(zip(self.a, self.b), start=1):
            out = out + ak * np.cos(k * psi) + bk * np.sin(k * psi)
        return out

    def derivative(self, psi, order: int = 1):
        psi = np.asarray(psi, dtype=np.float64)
        out = np.zeros(psi.shape)
        for k, (ak, bk) in enumerate(zip(self.a, self.b), start=1):
            # d^j/dpsi^j of cos/sin(k psi) cycles with phase j*pi/2
            phase = order * math.pi / 2.0
            out = out + k**order * (ak * np.cos(k * psi + phase) + bk * np.sin(k * psi + phase))
        return out


@dataclass(frozen=True, eq=False)
class StarObstacle:
    """Closed star-shaped set about ``kernel`` with boundary given by ``profile``."""

    kernel: np.ndarray
    profile: RadialProfile
    reference: np.ndarray | None = None
    frame: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        g = as_point(self.kernel)
        object.__setattr__(self, "kernel", g)
        object.__setattr__(self, "frame", reference_frame(g, self.reference))
        if g.shape[0] != 3 and not self.profile.is_cap:
            raise InputError("non-cap radial profiles are only supported on S^2")
        grid = np.linspace(0.0, TWO_PI, 1024, endpoint=False)
        rho = self.profile(grid)
        upper = math.pi / 2.0 - RHO_MARGIN
        if rho.min() <= RHO_MIN or rho.max() >= upper or self.profile.upper_bound() >= upper:
            raise InputError(
                f"angular extent must stay in ({RHO_MIN}, pi/2 - {RHO_MARGIN}); "
                f"got [{rho.min():.4f}, {rho.max():.4f}]"
            )

    @property
    def dim(self) -> int:
        return self.kernel.shape[0]

    def direction_angle(self, x) -> float:
        """Boundary parameter psi of the direction from the kernel towards x (S^2)."""
        x = as_point(x)
        return math.atan2(x @ self.frame[:, 1], x @ self.frame[:, 0]) % TWO_PI

    def boundary_point(self, psi) -> np.ndarray:
        """Boundary point(s) for parameter(s) psi; rows when psi is an array."""
        psi = np.asarray(psi, dtype=np.float64)
        rho = self.profile(psi)
        e1, e2 = self.frame[:, 0], self.frame[:, 1]
        u = np.multiply.outer(np.cos(psi), e1) + np.multiply.outer(np.sin(psi), e2)
        return np.multiply.outer(np.cos(rho), self.kernel) + np.sin(rho)[..., None] * u

    def boundary_normal(self, psi) -> np.ndarray:
        """Outward unit normal of the boundary curve at parameter psi (S^2 only)."""
        psi = float(psi)
        rho = float(self.profile(psi))
        drho = float(self.profile.derivative(psi))
        e1, e2 = self.frame[:, 0], self.frame[:, 1]
        u = math.cos(psi) * e1 + math.sin(psi) * e2
        du = -math.sin(psi) * e1 + math.cos(psi) * e2
        radial = -math.sin(rho) * self.kernel + math.cos(rho) * u
        tangent = drho * radial + math.sin(rho) * du
        b = math.cos(rho) * self.kernel + math.sin(rho) * u
        nrm = np.cross(b, tangent)
        nrm /= np.linalg.norm(nrm)
        return nrm if nrm @ radial > 0 else -nrm

    def sample_boundary(self, count: int) -> np.ndarray:
        if self.dim == 3:
            return self.boundary_point(np.linspace(0.0, TWO_PI, count, endpoint=False))
        # caps in higher dimension: random rim points
        rng = np.random.default_rng(count)
        t = rng.standard_normal((count, self.dim))
        t -= np.outer(t @ self.kernel, self.kernel)
        t /= np.linalg.norm(t, axis=1, keepdims=True)
        r = self.profile.a0
        return math.cos(r) * self.kernel + math.sin(r) * t


class FieldPack(NamedTuple):
    """Array form of an :class:`ObstacleField` consumed by the numba kernels."""

    kernels: np.ndarray
    frames: np.ndarray
    a0: np.ndarray
    ak: np.ndarray
    bk: np.ndarray
    rho_max: np.ndarray
    is_cap: np.ndarray
    grid: np.ndarray


@dataclass(frozen=True, eq=False)
class ObstacleField:
    """Ordered collection of obstacles sharing one ambient dimension."""

    obstacles: tuple
    dim: int
    grid_size: int = DEFAULT_GRID

    def __init__(self, obstacles: Sequence[StarObstacle], dim: int | None = None, grid_size: int = DEFAULT_GRID):
        obstacles = tuple(obstacles)
        if dim is None:
            if not obstacles:
                raise InputError("dimension is required for an empty obstacle field")
            dim = obstacles[0].dim
        if any(o.dim != dim for o in obstacles):
            raise InputError("all obstacles must live in the same dimension")
        object.__setattr__(self, "obstacles", obstacles)
        object.__setattr__(self, "dim", int(dim))
        object.__setattr__(self, "grid_size", int(grid_size))

    def __len__(self) -> int:
        return len(self.obstacles)

    def __iter__(self):
        return iter(self.obstacles)

    def __getitem__(self, i) -> StarObstacle:
        return self.obstacles[i]

    @cached_property
    def pack(self) -> FieldPack:
        m, n1 = len(self.obstacles), self.dim
        order = max([1] + [o.profile.order for o in self.obstacles])
        kernels = np.zeros((m, n1))
        frames = np.zeros((m, n1, n1 - 1))
        a0 = np.zeros(m)
        ak = np.zeros((m, order))
        bk = np.zeros((m, order))
        rho_max = np.zeros(m)
        is_cap = np.zeros(m, dtype=np.bool_)
        grid_len = self.grid_size if n1 == 3 else 1
        grid = np.zeros((m, grid_len, n1))
        for i, obs in enumerate(self.obstacles):
            kernels[i] = obs.kernel
            frames[i] = obs.frame
            a0[i] = obs.profile.a0
            ak[i, : obs.profile.order] = obs.profile.a
            bk[i, : obs.profile.order] = obs.profile.b
            rho_max[i] = obs.profile.upper_bound()
            is_cap[i] = obs.profile.is_cap
            if n1 == 3:
                grid[i] = obs.boundary_point(np.linspace(0.0, TWO_PI, grid_len, endpoint=False))
        return FieldPack(kernels, frames, a0, ak, bk, rho_max, is_cap, grid)

    def min_pairwise_separation(self, samples: int = 720) -> float:
        """Smallest angle between boundary samples of two distinct obstacles."""
        best = math.inf
        for i in range(len(self.obstacles)):
            for j in range(i + 1, len(self.obstacles)):
                oi, oj = self.obstacles[i], self.obstacles[j]
                if oi.profile.is_cap and oj.profile.is_cap:
                    gap = _angle(oi.kernel, oj.kernel) - oi.profile.a0 - oj.profile.a0
                else:
                    bi, bj = oi.sample_boundary(samples), oj.sample_boundary(samples)
                    gap = float(np.arccos(np.clip(bi @ bj.T, -1.0, 1.0).max()))
                    if any(contains(oi, p) for p in bj[:: max(1, samples // 64)]) or any(
                        contains(oj, p) for p in bi[:: max(1, samples // 64)]
                    ):
                        gap = 0.0
                best = min(best, gap)
        return best


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def _dot(a, b):
    s = 0.0
    for i in range(a.shape[0]):
        s += a[i] * b[i]
    return s


@njit(cache=True)
def _rho_eval(a0, ak, bk, psi):
    r = a0
    r1 = 0.0
    r2 = 0.0
    for j in range(ak.shape[0]):
        k = j + 1.0
        c = math.cos(k * psi)
        s = math.sin(k * psi)
        r += ak[j] * c + bk[j] * s
        r1 += k * (bk[j] * c - ak[j] * s)
        r2 -= k * k * (ak[j] * c + bk[j] * s)
    return r, r1, r2


@njit(cache=True)
def _fprime(cg, c1, c2, a0, ak, bk, psi):
    # first and second psi-derivatives of f(psi) = x . b(psi)
    r, r1, r2 = _rho_eval(a0, ak, bk, psi)
    cp = math.cos(psi)
    sp = math.sin(psi)
    s = c1 * cp + c2 * sp
    s1 = c2 * cp - c1 * sp
    cr = math.cos(r)
    sr = math.sin(r)
    a = cr * s - sr * cg
    f1 = r1 * a + sr * s1
    f2 = r2 * a + r1 * (r1 * (-cr * cg - sr * s) + cr * s1) + cr * r1 * s1 - sr * s
    return f1, f2


@njit(cache=True)
def _refine_psi(cg, c1, c2, a0, ak, bk, lo, hi, psi):
    """Safeguarded Newton for the local maximum of x . b(psi) inside [lo, hi]."""
    for _ in range(100):
        f1, f2 = _fprime(cg, c1, c2, a0, ak, bk, psi)
        if f1 > 0.0:
            lo = psi
        else:
            hi = psi
        if f2 < 0.0:
            nxt = psi - f1 / f2
            if nxt <= lo or nxt >= hi:
                nxt = 0.5 * (lo + hi)
        else:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - psi) < NEWTON_TOL or hi - lo < NEWTON_TOL:
            return nxt
        psi = nxt
    return psi


@njit(cache=True)
def _boundary_at(F, i, psi, out):
    r, _, _ = _rho_eval(F.a0[i], F.ak[i], F.bk[i], psi)
    cr = math.cos(r)
    sr = math.sin(r)
    cp = math.cos(psi)
    sp = math.sin(psi)
    for k in range(out.shape[0]):
        out[k] = cr * F.kernels[i, k] + sr * (cp * F.frames[i, k, 0] + sp * F.frames[i, k, 1])
    nrm = math.sqrt(_dot(out, out))
    for k in range(out.shape[0]):
        out[k] /= nrm


@njit(cache=True)
def _closest_on(F, i, x, pi_out):
    """Distance from x to obstacle i, writing the closest point to pi_out.

    Returns (distance, boundary parameter, inside flag).  Inside points get
    distance 0 and pi_out = x.
    """
    g = F.kernels[i]
    theta = _angle(x, g)
    n1 = x.shape[0]
    if F.is_cap[i]:
        r = F.a0[i]
        if theta <= r:
            pi_out[:] = x
            return 0.0, 0.0, True
        cg = _dot(x, g)
        nt = 0.0
        for k in range(n1):
            pi_out[k] = x[k] - cg * g[k]
            nt += pi_out[k] * pi_out[k]
        nt = math.sqrt(nt)
        if nt < 1e-300:
            for k in range(n1):
                pi_out[k] = F.frames[i, k, 0]
            nt = 1.0
        cr = math.cos(r)
        sr = math.sin(r)
        for k in range(n1):
            pi_out[k] = cr * g[k] + sr * pi_out[k] / nt
        psi = 0.0
        if n1 == 3:
            psi = math.atan2(_dot(x, F.frames[i, :, 1]), _dot(x, F.frames[i, :, 0]))
        return theta - r, psi, False

    cg = _dot(x, g)
    c1 = _dot(x, F.frames[i, :, 0])
    c2 = _dot(x, F.frames[i, :, 1])
    psi_x = math.atan2(c2, c1)
    rx, _, _ = _rho_eval(F.a0[i], F.ak[i], F.bk[i], psi_x)
    if theta <= rx:
        pi_out[:] = x
        return 0.0, psi_x, True
    grid = F.grid[i]
    m = grid.shape[0]
    best = -2.0
    jbest = 0
    for j in range(m):
        s = x[0] * grid[j, 0] + x[1] * grid[j, 1] + x[2] * grid[j, 2]
        if s > best:
            best = s
            jbest = j
    step = TWO_PI / m
    psi0 = jbest * step
    psi = _refine_psi(cg, c1, c2, F.a0[i], F.ak[i], F.bk[i], psi0 - step, psi0 + step, psi0)
    _boundary_at(F, i, psi, pi_out)
    return _angle(x, pi_out), psi, False


@njit(cache=True)
def _distances(F, x, eps, cut, need_all, d_out, pi_out):
    """Per-obstacle spherical distances, exact wherever they can matter.

    An obstacle's distance is computed exactly when it could be the minimum
    or could lie within ``eps``; otherwise d_out holds a lower bound.  When
    every candidate is provably farther than ``cut`` the nearest distance is
    only an estimate above ``cut``.
    Returns (index of nearest, nearest distance, count within eps, inside any).
    """
    m = F.kernels.shape[0]
    lb = np.empty(m)
    for i in range(m):
        lb[i] = _angle(x, F.kernels[i]) - F.rho_max[i]
        d_out[i] = lb[i]
    order = np.argsort(lb)
    best = np.inf
    imin = -1
    n_eps = 0
    inside = False
    for idx in range(m):
        i = order[idx]
        if not need_all:
            if lb[i] > best and lb[i] > eps:
                break
            if lb[i] > cut:
                if imin < 0:
                    best = lb[i]
                    imin = i
                break
        d, _, ins = _closest_on(F, i, x, pi_out[i])
        d_out[i] = d
        if ins:
            inside = True
        if d < best:
            best = d
            imin = i
        if d <= eps:
            n_eps += 1
    return imin, best, n_eps, inside


# ---------------------------------------------------------------------------
# Python API
# ---------------------------------------------------------------------------


def _check_dim(obs_or_field, x) -> np.ndarray:
    x = as_point(x)
    if x.shape[0] != obs_or_field.dim:
        raise InputError(f"point has dimension {x.shape[0]}, obstacle space has {obs_or_field.dim}")
    return x


def _single_pack(obs: StarObstacle, grid: int = DEFAULT_GRID) -> FieldPack:
    return ObstacleField([obs], grid_size=grid).pack


def contains(obs: StarObstacle, x) -> bool:
    """Closed-set membership test."""
    x = _check_dim(obs, x)
    theta = _angle(x, obs.kernel)
    if theta < 1e-15:
        return True
    if theta > math.pi - 1e-12:
        return False
    if obs.profile.is_cap:
        return bool(theta <= obs.profile.a0)
    return bool(theta <= float(obs.profile(obs.direction_angle(x))))


def obstacle_distance(obs: StarObstacle, x) -> float:
    """Spherical distance from x to one obstacle (0 inside)."""
    x = _check_dim(obs, x)
    pi = np.empty_like(x)
    d, _, _ = _closest_on(_single_pack(obs), 0, x, pi)
    return float(d)


def closest_point(obs: StarObstacle, x, grid: int = DEFAULT_GRID) -> np.ndarray:
    """Closest point of the obstacle to an outside point x.

    A ``grid``-sample scan locates every local maximum of x . b(psi), each is
    refined, and the best is returned.  If two refined candidates tie to 1e-6
    yet lie more than 0.1 rad apart in psi, an
    :class:`AmbiguousClosestPointWarning` is emitted and the candidate with
    the smallest parameter wins.
    """
    x = _check_dim(obs, x)
    if contains(obs, x):
        if _on_boundary(obs, x):
            return x.copy()
        raise InfeasibleStateError("closest point requested for a point inside the obstacle")
    pack = _single_pack(obs, grid)
    if obs.profile.is_cap:
        pi = np.empty_like(x)
        _closest_on(pack, 0, x, pi)
        return pi
    pts = pack.grid[0]
    f = pts @ x
    peaks = np.flatnonzero((f >= np.roll(f, 1)) & (f >= np.roll(f, -1)))
    step = TWO_PI / grid
    g, e1, e2 = obs.kernel, obs.frame[:, 0], obs.frame[:, 1]
    cg, c1, c2 = x @ g, x @ e1, x @ e2
    prof = pack.a0[0], pack.ak[0], pack.bk[0]
    cands = []
    for j in peaks:
        psi = _refine_psi(cg, c1, c2, *prof, j * step - step, j * step + step, j * step) % TWO_PI
        b = obs.boundary_point(psi)
        cands.append((_angle(x, b), psi, b))
    cands.sort(key=lambda c: (c[0], c[1]))
    best = cands[0]
    ties = [c for c in cands if c[0] - best[0] < 1e-6]
    if len(ties) > 1:
        spread = max(min(abs(c[1] - best[1]), TWO_PI - abs(c[1] - best[1])) for c in ties)
        if spread > 0.1:
            warnings.warn(
                f"closest point is not unique (parameters {[round(c[1], 4) for c in ties]})",
                AmbiguousClosestPointWarning,
                stacklevel=2,
            )
            best = min(ties, key=lambda c: c[1])
    return best[2]


def _on_boundary(obs: StarObstacle, x, tol: float = 1e-9) -> bool:
    theta = _angle(x, obs.kernel)
    rho = obs.profile.a0 if obs.profile.is_cap else float(obs.profile(obs.direction_angle(x)))
    return abs(theta - rho) <= tol


def obstacle_distances(field: ObstacleField, x) -> np.ndarray:
    """Exact spherical distance to every obstacle."""
    x = _check_dim(field, x)
    m = len(field)
    d = np.empty(m)
    pis = np.empty((m, field.dim))
    _distances(field.pack, x, 0.0, np.inf, True, d, pis)
    return d


def _flag_inside(dists) -> None:
    if len(dists) and np.min(dists) <= 0.0:
        warnings.warn("point lies inside the unsafe set", InfeasibleStateWarning, stacklevel=3)


def separation_spherical(field: ObstacleField, x) -> float:
    """min_i inf_{a in U_i} arccos(x . a)."""
    d = obstacle_distances(field, x)
    _flag_inside(d)
    return float(d.min()) if len(d) else math.inf


def separation_chordal(field: ObstacleField, x) -> float:
    """inf_{a in U} (1 - x . a), i.e. half the squared chordal distance."""
    d = obstacle_distances(field, x)
    _flag_inside(d)
    return float(2.0 * math.sin(d.min() / 2.0) ** 2) if len(d) else math.inf


def separation_product(field: ObstacleField, x) -> float:
    """Product over obstacles of the per-obstacle spherical distance."""
    d = obstacle_distances(field, x)
    _flag_inside(d)
    return float(np.prod(d)) if len(d) else math.inf


SEPARATIONS = {
    "spherical": separation_spherical,
    "chordal": separation_chordal,
    "product": separation_product,
}


def nearest_obstacle(field: ObstacleField, x) -> tuple[int, float, np.ndarray]:
    """(index, distance, closest point) of the nearest obstacle; lowest index on ties."""
    x = _check_dim(field, x)
    if not len(field):
        raise InputError("field has no obstacles")
    d = obstacle_distances(field, x)
    i = int(np.argmin(d))
    if d[i] <= 0.0:
        raise InfeasibleStateError("point lies inside the unsafe set")
    return i, float(d[i]), closest_point(field[i], x, field.grid_size)


def outward_normal(obs: StarObstacle, x) -> np.ndarray:
    """Unit tangent vector at x pointing away from the obstacle."""
    x = _check_dim(obs, x)
    pi = closest_point(obs, x)
    w = projection_matrix(x) @ (x - pi)
    nrm = np.linalg.norm(w)
    if nrm < 1e-9:
        raise InfeasibleStateError("outward normal is undefined on the obstacle boundary")
    return w / nrm


def separation_gradient(field: ObstacleField, x) -> np.ndarray:
    """Tangential gradient of the spherical separation (the active outward normal)."""
    i, _, _ = nearest_obstacle(field, x)
    return outward_normal(field[i], x)


@dataclass
class Assumption2Report:
    ok: bool
    worst_margin: float
    samples: int
    failing_point: np.ndarray | None = None


def tube_samples(obs: StarObstacle, count: int, max_distance: float, rng: np.random.Generator, min_distance: float = 0.0):
    """Points at known distance from the obstacle, paired with their closest points.

    Each sample leaves a random boundary point along the outward boundary
    normal, so (within the unique-projection tube) the closest point and the
    distance are known independently of the closest-point solver.
    Returns (points, closest points, distances).
    """
    dist = rng.uniform(min_distance, max_distance, count)
    dist[dist <= 0.0] = max_distance * 1e-3
    pts = np.empty((count, obs.dim))
    base = np.empty((count, obs.dim))
    if obs.dim == 3:
        psi = rng.uniform(0.0, TWO_PI, count)
        for k in range(count):
            b = obs.boundary_point(psi[k])
            nrm = obs.boundary_normal(psi[k])
            base[k] = b
            pts[k] = math.cos(dist[k]) * b + math.sin(dist[k]) * nrm
    else:
        rim = obs.sample_boundary(count) if count else np.empty((0, obs.dim))
        for k in range(count):
            b = rim[k]
            nrm = -(obs.kernel - b * (b @ obs.kernel))
            nrm /= np.linalg.norm(nrm)
            base[k] = b
            pts[k] = math.cos(dist[k]) * b + math.sin(dist[k]) * nrm
    return pts, base, dist


def validate_assumption2(obs: StarObstacle, delta1: float, samples: int = 10_000, seed: int = 0) -> Assumption2Report:
    """Check n(x) . P(x)(x - g) > 0 on sampled points with distance in (0, delta1]."""
    if delta1 <= 0.0:
        raise InputError("delta1 must be positive")
    rng = np.random.default_rng(seed)
    pts, base, _ = tube_samples(obs, samples, delta1, rng)
    worst = math.inf
    worst_pt = None
    for x, b in zip(pts, base):
        w = x - b
        w = w - x * (x @ w)
        n = w / np.linalg.norm(w)
        r = obs.kernel - x * (x @ obs.kernel)
        margin = -(n @ r)
        if margin < worst:
            worst = margin
            worst_pt = x
    ok = worst > 0.0
    return Assumption2Report(ok, float(worst), samples, None if ok else worst_pt)


def check_projection_uniqueness(obs: StarObstacle, delta_u: float, samples: int = 2000, seed: int = 1) -> tuple[bool, float]:
    """Empirical uniqueness of the closest point inside the delta_u tube.

    Returns (all unique, worst distance error) where the error compares the
    solver's distance with the construction distance of each tube sample.
    """
    rng = np.random.default_rng(seed)
    pts, _, dist = tube_samples(obs, samples, delta_u, rng, min_distance=1e-4)
    unique = True
    worst = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", AmbiguousClosestPointWarning)
        for x, t in zip(pts, dist):
            try:
                pi = closest_point(obs, x)
            except AmbiguousClosestPointWarning:
                unique = False
                continue
            worst = max(worst, abs(_angle(x, pi) - t))
    return unique and worst < 1e-6, worst
