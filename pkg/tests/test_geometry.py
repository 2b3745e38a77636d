from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperlab.errors import DomainError, RangeError
from hyperlab.geometry import (PolarPoint, as_ball_point, conformal_factor, euclidean_radius,
                               from_polar, geodesic_radius, hyperbolic_distance, interpolate_radial,
                               to_polar, translate, translate_inverse, vector_field_V)
from hyperlab.groundstate import profile_from_samples
from hyperlab.ode import validate_params


def random_ball(rng, n, N=3, rmax=0.95):
    d = rng.standard_normal((n, N))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * rmax * rng.random((n, 1)) ** (1.0 / N)


def test_geodesic_radius_values():
    assert geodesic_radius(np.zeros(3)) == 0.0
    assert geodesic_radius([0.5, 0.0, 0.0]) == pytest.approx(math.log(3.0), abs=1e-15)


def test_geodesic_radius_round_trip():
    rng = np.random.default_rng(1)
    r = rng.uniform(0.0, 0.999, 100)
    t = np.array([geodesic_radius([x, 0.0]) for x in r])
    assert np.max(np.abs(np.tanh(t / 2) - r)) < 1e-13
    assert np.max(np.abs(euclidean_radius(t) - r)) < 1e-13


def test_geodesic_radius_rejects_boundary():
    with pytest.raises(DomainError):
        geodesic_radius([1.0, 0.0])
    with pytest.raises(DomainError):
        geodesic_radius([0.9999995, 0.0])


def test_polar_round_trip():
    x = np.array([0.2, -0.3, 0.1])
    pt = to_polar(x)
    assert abs(np.linalg.norm(pt.omega) - 1) < 1e-12
    assert pt.t == pytest.approx(2 * math.atanh(np.linalg.norm(x)))
    assert np.allclose(from_polar(pt), x, atol=1e-15)
    with pytest.raises(DomainError):
        PolarPoint(1.0, np.array([1.0, 1.0]))
    with pytest.raises(DomainError):
        PolarPoint(-1.0, np.array([1.0, 0.0]))


def test_as_ball_point_rejects():
    with pytest.raises(DomainError):
        as_ball_point([np.nan, 0.0])
    with pytest.raises(DomainError):
        as_ball_point([[0.1]])


def test_conformal_factor():
    assert conformal_factor(np.zeros(2)) == 2.0
    assert conformal_factor([0.5, 0.0]) == pytest.approx(8.0 / 3.0, rel=1e-15)
    vals = [conformal_factor([r, 0.0]) for r in np.linspace(0, 0.99, 50)]
    assert np.all(np.diff(vals) > 0)
    with pytest.raises(DomainError):
        conformal_factor([1.0, 0.0])


def test_translate_identities():
    b = np.array([0.3, -0.2, 0.1])
    assert np.max(np.abs(translate(b, np.zeros(3)) - b)) < 1e-15
    x = np.array([-0.4, 0.5, 0.2])
    assert np.allclose(translate(np.zeros(3), x), x, atol=0)
    assert np.max(np.abs(translate(b, -b))) < 1e-15
    assert np.max(np.abs(translate_inverse(b, b))) < 1e-15
    assert np.allclose(translate_inverse(np.zeros(3), x), x, atol=0)


def test_translate_round_trip_random():
    rng = np.random.default_rng(2)
    B = random_ball(rng, 100)
    X = random_ball(rng, 100)
    err = max(np.max(np.abs(translate_inverse(b, translate(b, x)) - x)) for b, x in zip(B, X))
    assert err < 1e-12


def test_translate_dimension_mismatch():
    with pytest.raises(DomainError):
        translate(np.zeros(2), np.zeros(3))


def test_distance_invariance_random():
    rng = np.random.default_rng(3)
    B, X, Y = (random_ball(rng, 100) for _ in range(3))
    err = max(abs(hyperbolic_distance(translate(b, x), translate(b, y)) - hyperbolic_distance(x, y))
              for b, x, y in zip(B, X, Y))
    assert err < 1e-10


def test_distance_from_origin_matches_geodesic_radius():
    x = np.array([0.3, 0.4])
    assert hyperbolic_distance(np.zeros(2), x) == pytest.approx(geodesic_radius(x), rel=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-0.55, 0.55), min_size=6, max_size=6))
def test_translation_preserves_distance_property(c):
    b, x = np.array(c[:3]), np.array(c[3:])
    d0 = hyperbolic_distance(np.zeros(3), x)
    d1 = hyperbolic_distance(b, translate(b, x))
    assert abs(d0 - d1) < 1e-10 * max(1.0, d0)


def test_vector_field_values():
    assert np.array_equal(vector_field_V(2, np.zeros(3)), np.array([0.0, 1.0, 0.0]))
    v = vector_field_V(1, np.array([0.5, 0.0, 0.0]))
    assert v[0] == pytest.approx(0.75, abs=1e-15)
    with pytest.raises(DomainError):
        vector_field_V(4, np.zeros(3))


def test_vector_field_is_translation_derivative():
    rng = np.random.default_rng(4)
    step = 1e-4
    X = random_ball(rng, 200)
    worst = 0.0
    for k, x in enumerate(X):
        i = 1 + k % 3
        e = np.zeros(3)
        e[i - 1] = step
        fd = (translate(e, x) - translate(-e, x)) / (2 * step)
        v = vector_field_V(i, x)
        worst = max(worst, np.linalg.norm(fd - v) / np.linalg.norm(v))
    assert worst < 1e-6


def _synthetic(t, u, du):
    params = validate_params(3, 3.0, 0.5)
    return profile_from_samples(params, t, u, du, amplitude=0.0, h=0.01)


def test_interpolate_nodes_and_polynomials():
    t = 0.01 * np.arange(1, 501)
    prof = _synthetic(t, 2.0 - 0.3 * t, -0.3 * np.ones_like(t))
    v, d = interpolate_radial(prof, t[10:20])
    assert np.array_equal(v, prof.u[10:20])
    s = np.linspace(0.02, 4.9, 777)
    v, d = interpolate_radial(prof, s)
    assert np.max(np.abs(v - (2.0 - 0.3 * s))) < 1e-13
    assert np.max(np.abs(d + 0.3)) < 1e-12


def test_interpolate_sine():
    t = 0.01 * np.arange(1, 1001)
    prof = _synthetic(t, np.sin(t), np.cos(t))
    s = np.linspace(0.01, 10.0, 5003)
    v, _ = interpolate_radial(prof, s)
    assert np.max(np.abs(v - np.sin(s))) < 1e-8


def test_interpolate_range_error():
    t = 0.01 * np.arange(1, 11)
    prof = _synthetic(t, np.ones_like(t), np.zeros_like(t))
    with pytest.raises(RangeError):
        interpolate_radial(prof, 0.2)
    with pytest.raises(RangeError):
        interpolate_radial(prof, -0.1)
