"""Primitives on the unit n-sphere embedded in R^{n+1}.

Points are plain float64 arrays of unit norm; :class:`UnitPoint` and
:class:`TangentVector` are thin validated wrappers for callers that want the
invariants checked at construction time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import GeodesicUndefinedError, InputError

MIN_NORM = 1e-8
ANTIPODAL_GAP = 1e-9
COINCIDENT_ANGLE = 1e-12


def as_point(x) -> np.ndarray:
    """Return ``x`` as a normalized float64 vector (accepts UnitPoint)."""
    if isinstance(x, UnitPoint):
        return x.coords
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] < 2:
        raise InputError(f"expected a vector of dimension >= 2, got shape {arr.shape}")
    nrm = np.linalg.norm(arr)
    if not np.isfinite(nrm) or nrm < MIN_NORM:
        raise InputError(f"cannot normalize vector with norm {nrm:g}")
    return arr / nrm


@dataclass(frozen=True, eq=False)
class UnitPoint:
    """A point on S^n, normalized on construction."""

    coords: np.ndarray

    def __init__(self, coords):
        arr = np.asarray(coords, dtype=np.float64)
        if arr.ndim != 1 or arr.shape[0] < 2:
            raise InputError(f"expected a vector of dimension >= 2, got shape {arr.shape}")
        nrm = np.linalg.norm(arr)
        if not np.isfinite(nrm) or nrm < MIN_NORM:
            raise InputError(f"cannot normalize vector with norm {nrm:g}")
        arr = arr / nrm
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)

    @property
    def dim(self) -> int:
        """Ambient dimension n + 1."""
        return self.coords.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.coords if dtype is None else self.coords.astype(dtype)

    def __repr__(self) -> str:
        return f"UnitPoint({np.array2string(self.coords, precision=6)})"


@dataclass(frozen=True, eq=False)
class TangentVector:
    """A vector in the tangent space at ``base``."""

    base: UnitPoint
    vec: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.vec, dtype=np.float64)
        if vec.shape != self.base.coords.shape:
            raise InputError("tangent vector and base point differ in dimension")
        if abs(vec @ self.base.coords) > 1e-10 * max(1.0, np.linalg.norm(vec)):
            raise InputError("vector is not tangent at its base point")
        object.__setattr__(self, "vec", vec)

    def __array__(self, dtype=None, copy=None):
        return self.vec if dtype is None else self.vec.astype(dtype)


def projection_matrix(x) -> np.ndarray:
    """P(x) = I - x x^T."""
    x = as_point(x)
    return np.eye(x.shape[0]) - np.outer(x, x)


def project(x, v) -> TangentVector:
    """Orthogonal projection of the ambient vector ``v`` onto T_x S^n."""
    base = x if isinstance(x, UnitPoint) else UnitPoint(x)
    v = np.asarray(v, dtype=np.float64)
    if v.shape != base.coords.shape:
        raise InputError(f"dimension mismatch: x has {base.dim} entries, v has shape {v.shape}")
    xc = base.coords
    out = v - xc * (xc @ v)
    # one correction pass keeps the result tangent to ~1e-16 even for large v
    out = out - xc * (xc @ out)
    return TangentVector(base, out)


@njit(cache=True)
def _angle(a, b):
    # 2*atan2(|a-b|, |a+b|) is accurate near 0 and pi, where arccos is not
    s = 0.0
    t = 0.0
    for i in range(a.shape[0]):
        s += (a[i] - b[i]) ** 2
        t += (a[i] + b[i]) ** 2
    return 2.0 * math.atan2(math.sqrt(s), math.sqrt(t))


def sphere_angle(a, b) -> float:
    """Great-circle angle between two points, in [0, pi]."""
    a = as_point(a)
    b = as_point(b)
    if a.shape != b.shape:
        raise InputError("points differ in dimension")
    return float(_angle(a, b))


def geodesic_point(a, b, lam: float) -> np.ndarray:
    """Point at fraction ``lam`` along the minimizing great-circle arc from a to b."""
    a = as_point(a)
    b = as_point(b)
    if a.shape != b.shape:
        raise InputError("points differ in dimension")
    theta = float(_angle(a, b))
    if theta > math.pi - ANTIPODAL_GAP:
        raise GeodesicUndefinedError("geodesic between antipodal points is not unique")
    if theta < COINCIDENT_ANGLE:
        return a.copy()
    g = (math.sin((1.0 - lam) * theta) * a + math.sin(lam * theta) * b) / math.sin(theta)
    return g / np.linalg.norm(g)


def tangent_basis(x) -> np.ndarray:
    """Orthonormal basis of T_x S^n as the columns of an (n+1) x n matrix."""
    x = as_point(x)
    # QR of [x | I] gives x as the first column; the rest span its complement
    q, _ = np.linalg.qr(np.column_stack([x, np.eye(x.shape[0])]))
    basis = q[:, 1 : x.shape[0]]
    basis -= np.outer(x, x @ basis)
    basis, _ = np.linalg.qr(basis)
    return basis


def reference_frame(g, reference=None) -> np.ndarray:
    """Deterministic orthonormal tangent frame at ``g`` (columns).

    The first column is the projection of ``reference`` (default: the
    coordinate axis least aligned with ``g``); for n = 2 the second column is
    ``g x e1`` so the frame is right-handed about ``g``.
    """
    g = as_point(g)
    dim = g.shape[0]
    if reference is None:
        reference = np.zeros(dim)
        reference[int(np.argmin(np.abs(g)))] = 1.0
    ref = np.asarray(reference, dtype=np.float64)
    e1 = ref - g * (g @ ref)
    nrm = np.linalg.norm(e1)
    if nrm < 1e-6:
        raise InputError("frame reference is parallel to the kernel point")
    e1 /= nrm
    if dim == 3:
        return np.column_stack([e1, np.cross(g, e1)])
    q, _ = np.linalg.qr(np.column_stack([g, e1, np.eye(dim)]))
    frame = q[:, 1:dim] * np.sign(q[:, 1] @ e1)
    frame[:, 0] = e1
    return frame


def random_points(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """Uniform samples on S^{dim-1}, one per row."""
    pts = rng.standard_normal((count, dim))
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def fibonacci_sphere(count: int) -> np.ndarray:
    """Near-uniform deterministic point set on S^2."""
    i = np.arange(count) + 0.5
    z = 1.0 - 2.0 * i / count
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
