"""Poincare disc model of hyperbolic space.

Points of the model are plain numpy vectors of Euclidean coordinates with
norm below one.  Geodesic polar coordinates use ``|x| = tanh(t/2)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalDegeneracyError, RangeError

# beyond this radius the conformal factor exceeds ~1e6 and we refuse the point
MAX_RADIUS = 0.999999


def as_ball_point(x, *, name: str = "x") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise DomainError(f"{name} must be a non-empty 1-d coordinate vector")
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{name} has non-finite coordinates")
    r = float(np.linalg.norm(x))
    if r >= 1.0:
        raise DomainError(f"|{name}| = {r!r} is not inside the unit ball")
    if r > MAX_RADIUS:
        raise DomainError(f"|{name}| = {r!r} exceeds the supported radius {MAX_RADIUS}")
    return x


@dataclass(frozen=True)
class PolarPoint:
    t: float
    omega: np.ndarray

    def __post_init__(self):
        if self.t < 0:
            raise DomainError("geodesic radius must be non-negative")
        if abs(np.linalg.norm(self.omega) - 1.0) > 1e-12:
            raise DomainError("omega must be a unit vector")


def _radius(r: float) -> float:
    if not 0.0 <= r < 1.0:
        raise DomainError(f"Euclidean radius {r!r} outside [0, 1)")
    if r > MAX_RADIUS:
        raise DomainError(f"Euclidean radius {r!r} exceeds {MAX_RADIUS}")
    return r


def geodesic_radius(x) -> float:
    """Hyperbolic distance from the origin, ``log((1+|x|)/(1-|x|))``."""
    r = _radius(float(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=float)))))
    return 2.0 * float(np.arctanh(r))


def euclidean_radius(t):
    """Inverse of :func:`geodesic_radius` on radii: ``tanh(t/2)``."""
    return np.tanh(np.asarray(t, dtype=float) / 2.0)


def to_polar(x) -> PolarPoint:
    x = as_ball_point(x)
    r = float(np.linalg.norm(x))
    if r == 0.0:
        omega = np.zeros_like(x)
        omega[0] = 1.0
    else:
        omega = x / r
    return PolarPoint(geodesic_radius(x), omega)


def from_polar(point: PolarPoint) -> np.ndarray:
    return float(euclidean_radius(point.t)) * np.asarray(point.omega, dtype=float)


def conformal_factor(x) -> float:
    """Scalar ``2/(1-|x|^2)`` multiplying each ``dx_i`` in the metric."""
    r = _radius(float(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=float)))))
    return 2.0 / (1.0 - r * r)


def hyperbolic_distance(x, y) -> float:
    """Disc-model distance ``arccosh(1 + 2|x-y|^2 / ((1-|x|^2)(1-|y|^2)))``.

    Written with ``arcsinh`` of the half-argument so that nearby points do not
    lose all their digits to cancellation in ``arccosh(1 + small)``.
    """
    x = as_ball_point(x)
    y = as_ball_point(y, name="y")
    d2 = float(np.sum((x - y) ** 2))
    q = d2 / ((1.0 - x @ x) * (1.0 - y @ y))
    return 2.0 * float(np.arcsinh(np.sqrt(q)))


def translate(b, x) -> np.ndarray:
    """Hyperbolic translation taking the origin to ``b``."""
    b = as_ball_point(b, name="b")
    x = as_ball_point(x)
    if b.shape != x.shape:
        raise DomainError("b and x must have the same dimension")
    bb = b @ b
    xx = x @ x
    xb = x @ b
    den = bb * xx + 2.0 * xb + 1.0
    if abs(den) < 1e-14:
        raise NumericalDegeneracyError("translation denominator vanished")
    return ((1.0 - bb) * x + (xx + 2.0 * xb + 1.0) * b) / den


def translate_inverse(b, y) -> np.ndarray:
    """Inverse translation, which is the translation by ``-b``."""
    b = as_ball_point(b, name="b")
    return translate(-b, y)


def vector_field_V(i: int, x) -> np.ndarray:
    """Coefficients of ``V_i = (1+|x|^2) d_i - 2 x_i sum_j x_j d_j`` at ``x``.

    ``i`` is 1-based, matching the usual axis labelling.
    """
    x = as_ball_point(x)
    n = x.size
    if not 1 <= i <= n:
        raise DomainError(f"axis index {i} outside 1..{n}")
    v = -2.0 * x[i - 1] * x
    v[i - 1] += 1.0 + x @ x
    return v


def interpolate_radial(profile, t, *, order: int = 3):
    """Evaluate ``(u(t), u'(t))`` from a sampled radial profile.

    ``order=3`` is the piecewise cubic Hermite interpolant built from the
    stored ``(u, u')`` samples; ``order=5`` also uses the stored ``u''`` and
    is C^2, which the finite-difference verifications need.
    """
    t_arr = np.asarray(t, dtype=float)
    lo, hi = profile.interp_range
    if np.any(t_arr < lo - 1e-14) or np.any(t_arr > hi + 1e-12 * max(1.0, hi)):
        raise RangeError(f"t outside the profile range [{lo}, {hi}]")
    spline = profile.spline(order)
    t_c = np.clip(t_arr, lo, hi)
    value = spline(t_c)
    deriv = spline(t_c, 1)
    if t_arr.ndim == 0:
        return float(value), float(deriv)
    return value, deriv
