import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from spherectl.errors import GeodesicUndefinedError, InputError
from spherectl.geometry import (
    UnitPoint,
    fibonacci_sphere,
    geodesic_point,
    project,
    projection_matrix,
    random_points,
    reference_frame,
    sphere_angle,
    tangent_basis,
)

finite = st.floats(-10, 10, allow_nan=False)
vec3 = arrays(np.float64, 3, elements=finite).filter(lambda v: np.linalg.norm(v) > 1e-3)
vec4 = arrays(np.float64, 4, elements=finite).filter(lambda v: np.linalg.norm(v) > 1e-3)


def test_unit_point_normalizes():
    p = UnitPoint([3.0, 0.0, 4.0])
    assert np.allclose(p.coords, [0.6, 0.0, 0.8])
    assert p.dim == 3


@pytest.mark.parametrize("bad", [[0.0, 0.0, 0.0], [np.nan, 1.0, 0.0], [1.0]])
def test_unit_point_rejects_degenerate(bad):
    with pytest.raises(InputError):
        UnitPoint(bad)


def test_projection_kills_normal_component():
    x = np.array([0.0, 0.0, 1.0])
    t = project(x, [1.0, 2.0, 3.0])
    assert np.allclose(t.vec, [1.0, 2.0, 0.0])


@given(vec4, vec4)
def test_projection_idempotent_and_tangent(xr, v):
    x = xr / np.linalg.norm(xr)
    P = projection_matrix(x)
    assert np.allclose(P @ P, P, atol=1e-12)
    assert abs(x @ project(x, v).vec) < 1e-12 * max(1.0, np.linalg.norm(v))


def test_angle_known_values():
    e = np.eye(3)
    assert sphere_angle(e[0], e[1]) == pytest.approx(math.pi / 2, abs=1e-15)
    assert sphere_angle(e[0], -e[0]) == pytest.approx(math.pi, abs=1e-15)
    assert sphere_angle(e[0], e[0]) == 0.0


def test_angle_accurate_for_tiny_separation():
    # arccos would lose about half the digits here
    a = np.array([1.0, 0.0, 0.0])
    b = np.array([math.cos(1e-9), math.sin(1e-9), 0.0])
    assert sphere_angle(a, b) == pytest.approx(1e-9, rel=1e-7)


@given(vec3, vec3, st.floats(0, 1))
def test_geodesic_splits_angle(a, b, lam):
    theta = sphere_angle(a, b)
    if theta > math.pi - 1e-6 or theta < 1e-8:
        return
    g = geodesic_point(a, b, lam)
    assert abs(np.linalg.norm(g) - 1.0) < 1e-12
    assert sphere_angle(a, g) == pytest.approx(lam * theta, abs=1e-9)
    assert sphere_angle(g, b) == pytest.approx((1 - lam) * theta, abs=1e-9)


def test_geodesic_endpoints_and_antipodes():
    a, b = np.eye(3)[0], np.eye(3)[1]
    assert np.allclose(geodesic_point(a, b, 0.0), a)
    assert np.allclose(geodesic_point(a, b, 1.0), b)
    assert np.allclose(geodesic_point(a, b, 0.5), np.array([1.0, 1.0, 0.0]) / math.sqrt(2))
    with pytest.raises(GeodesicUndefinedError):
        geodesic_point(a, -a, 0.5)


@settings(max_examples=50)
@given(st.one_of(vec3, vec4))
def test_tangent_basis_orthonormal(xr):
    x = xr / np.linalg.norm(xr)
    B = tangent_basis(x)
    assert B.shape == (x.size, x.size - 1)
    assert np.allclose(B.T @ B, np.eye(x.size - 1), atol=1e-12)
    assert np.allclose(x @ B, 0.0, atol=1e-12)


def test_reference_frame_right_handed_on_s2():
    g = np.array([0.3, -0.2, 0.9])
    F = reference_frame(g)
    gn = g / np.linalg.norm(g)
    assert np.allclose(np.cross(F[:, 0], F[:, 1]), gn)


def test_random_and_fibonacci_points_are_unit():
    pts = random_points(np.random.default_rng(0), 100, 5)
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0)
    fib = fibonacci_sphere(1000)
    assert np.allclose(np.linalg.norm(fib, axis=1), 1.0)
    # near-uniform: mean close to the origin
    assert np.linalg.norm(fib.mean(axis=0)) < 1e-2
