"""Cross-checks tying the disc-model geometry to the radial analysis.

Every check returns a :class:`CheckReport`.  The ``mutation`` arguments seed
a known implementation bug so the test-suite can confirm that each check
notices it.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .energy import RadialFunction, radial_integral, weak_form
from .errors import ConfigurationError, DomainError
from .geometry import MAX_RADIUS
from .groundstate import ProfileKind, RadialProfile
from .spectral import Variant, assemble

ISOMETRY_TOL = 1e-4
KERNEL_FORMULA_TOL = 1e-6
# image norm of the l=1 operator on u' must stay below this multiple of h^2
# (about 23 at N=3, p=3, lambda=0.5)
KERNEL_IMAGE_CONSTANT = 50.0


class Mutation(str, enum.Enum):
    METRIC_POWER = "metric_power"
    DROP_DRIFT = "drop_drift"
    ANGULAR = "angular"


@dataclass(frozen=True)
class CheckReport:
    name: str
    passed: bool
    max_error: float
    tolerance: float
    details: dict = field(default_factory=dict)

    @classmethod
    def make(cls, name: str, max_error: float, tolerance: float, **details) -> "CheckReport":
        return cls(name=name, passed=bool(max_error <= tolerance), max_error=float(max_error),
                   tolerance=float(tolerance), details=details)

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "max_error": self.max_error,
                "tolerance": self.tolerance, "details": self.details}


def _mutation(m) -> Optional[Mutation]:
    return None if m is None else Mutation(m)


def _translate_many(b: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Row-wise hyperbolic translation by ``b`` (same formula as :func:`geometry.translate`)."""
    bb = b @ b
    xx = np.einsum("ij,ij->i", X, X)
    xb = X @ b
    den = bb * xx + 2.0 * xb + 1.0
    return ((1.0 - bb) * X + np.outer(xx + 2.0 * xb + 1.0, b)) / den[:, None]


def _radial_values(profile: RadialProfile, Y: np.ndarray) -> np.ndarray:
    r = np.linalg.norm(Y, axis=1)
    if np.any(r >= 1.0):
        raise DomainError("point left the unit ball")
    t = 2.0 * np.arctanh(r)
    return profile.spline(5)(np.clip(t, 0.0, profile.T))


def _sample_points(rng: np.random.Generator, N: int, count: int, t_max: float, accept) -> np.ndarray:
    out = []
    tries = 0
    while len(out) < count:
        tries += 1
        if tries > 100 * count:
            raise ConfigurationError("could not place sample points inside the interpolation range")
        w = rng.standard_normal(N)
        w /= np.linalg.norm(w)
        t = rng.uniform(0.0, t_max)
        x = math.tanh(t / 2.0) * w
        if accept(x):
            out.append(x)
    return np.array(out)


def pde_residual(profile: RadialProfile, X: np.ndarray, b=None, *, mutation=None,
                 step: float = 1e-3) -> np.ndarray:
    """Residual of ``-Delta_B w - lambda w - |w|^{p-1} w`` for ``w = U o tau_b`` at rows of ``X``.

    Derivatives are fourth-order central differences with step
    ``step * (1 - |x|^2)``; the profile is read through its C^2 quintic
    interpolant.
    """
    mutation = _mutation(mutation)
    params = profile.params
    N = params.N
    X = np.atleast_2d(np.asarray(X, float))
    b = np.zeros(N) if b is None else np.asarray(b, float)
    m = X.shape[0]
    rr = np.einsum("ij,ij->i", X, X)
    d = step * (1.0 - rr)
    offsets = [(-2, -1.0), (-1, 16.0), (1, 16.0), (2, -1.0)]
    pts = [X]
    for i in range(N):
        for k, _ in offsets:
            Y = X.copy()
            Y[:, i] += k * d
            pts.append(Y)
    P = np.concatenate(pts)
    vals = _radial_values(profile, _translate_many(b, P))
    w0 = vals[:m]
    lap = np.zeros(m)
    grad = np.zeros((m, N))
    for i in range(N):
        base = m * (1 + 4 * i)
        wm2, wm1, wp1, wp2 = (vals[base + j * m: base + (j + 1) * m] for j in range(4))
        lap += (-wp2 + 16 * wp1 - 30 * w0 + 16 * wm1 - wm2) / (12 * d * d)
        grad[:, i] = (-wp2 + 8 * wp1 - 8 * wm1 + wm2) / (12 * d)
    f = (1.0 - rr) / 2.0
    metric = f if mutation == Mutation.METRIC_POWER else f * f
    drift = 0.0 if mutation == Mutation.DROP_DRIFT else (N - 2) * f * np.einsum("ij,ij->i", X, grad)
    lap_b = metric * lap + drift
    return -lap_b - params.lam * w0 - np.abs(w0) ** (params.p - 1) * w0


def check_isometry_invariance(profile: RadialProfile, b, sample_count: int = 200, *, seed: int = 0,
                              tolerance: float = ISOMETRY_TOL, t_sample: float = 8.0,
                              mutation=None) -> CheckReport:
    """``U o tau_b`` solves the same equation, checked pointwise at random points."""
    b = np.asarray(b, float)
    N = profile.params.N
    if b.shape != (N,):
        raise DomainError(f"b must have {N} coordinates")
    if np.linalg.norm(b) >= 0.9:
        raise DomainError("|b| must be below 0.9")
    rng = np.random.default_rng(seed)
    limit = min(profile.T - 1.0, 2.0 * math.atanh(MAX_RADIUS))

    def inside(x):
        y = _translate_many(b, x[None, :])[0]
        return 2.0 * math.atanh(min(np.linalg.norm(y), 1 - 1e-16)) < limit

    X = _sample_points(rng, N, sample_count, min(t_sample, limit), inside)
    res = np.abs(pde_residual(profile, X, b, mutation=mutation))
    i = int(np.argmax(res))
    return CheckReport.make("isometry_invariance", res[i], tolerance, b=b.tolist(),
                            sample_count=sample_count, seed=seed, worst_point=X[i].tolist(),
                            mean_residual=float(np.mean(res)),
                            mutation=None if mutation is None else Mutation(mutation).value)


def kernel_closed_form(profile: RadialProfile, X: np.ndarray, i: int, *, mutation=None) -> np.ndarray:
    """``(x_i/|x|)(1-|x|^2) U'(|x|)`` with ``U'(|x|) = u'(t) 2/(1-|x|^2)``."""
    X = np.atleast_2d(X)
    r = np.linalg.norm(X, axis=1)
    t = 2.0 * np.arctanh(r)
    du = profile.spline(5)(t, 1)
    jac = 2.0 / (1.0 - r * r)
    if _mutation(mutation) == Mutation.METRIC_POWER:
        jac = jac ** 2
    return X[:, i - 1] / r * (1.0 - r * r) * du * jac


def kernel_by_translation(profile: RadialProfile, X: np.ndarray, i: int, step: float = 1e-3) -> np.ndarray:
    """Fourth-order central difference of ``s -> U(tau_{s e_i}(x))`` at ``s = 0``."""
    X = np.atleast_2d(X)
    N = X.shape[1]
    e = np.zeros(N)
    e[i - 1] = 1.0
    vals = {k: _radial_values(profile, _translate_many(k * step * e, X)) for k in (-2, -1, 1, 2)}
    return (-vals[2] + 8 * vals[1] - 8 * vals[-1] + vals[-2]) / (12 * step)


def check_kernel_formula(profile: RadialProfile, i: int = 1, sample_count: int = 200, *, seed: int = 0,
                         tolerance: float = KERNEL_FORMULA_TOL, mutation=None) -> CheckReport:
    """Kernel element from the translation derivative versus its closed form.

    The error is relative to the largest closed-form magnitude in the sample.
    """
    N = profile.params.N
    if not 1 <= i <= N:
        raise DomainError(f"axis index {i} outside 1..{N}")
    rng = np.random.default_rng(seed)
    X = _sample_points(rng, N, sample_count, min(6.0, profile.T - 1.0), lambda x: np.linalg.norm(x) > 1e-3)
    a = kernel_by_translation(profile, X, i)
    b = kernel_closed_form(profile, X, i, mutation=mutation)
    scale = float(np.max(np.abs(b)))
    err = float(np.max(np.abs(a - b))) / scale
    return CheckReport.make("kernel_formula", err, tolerance, axis=i, sample_count=sample_count,
                            seed=seed, scale=scale,
                            mutation=None if mutation is None else Mutation(mutation).value)


def kernel_image(profile: RadialProfile, ell: int = 1, *, h: Optional[float] = None, mutation=None,
                 dirichlet: bool = False):
    """``(op, phi, image)`` for the mode operator applied to ``u'`` on its grid.

    With ``dirichlet=False`` the true endpoint values ``u'(0) = 0`` and
    ``u'(T)`` enter the stencil; with ``dirichlet=True`` they are replaced by
    zero as in the eigenvalue problem.
    """
    angular = None
    if _mutation(mutation) == Mutation.ANGULAR:
        N = profile.params.N
        angular = float(ell * (ell + N - 1))
    op = assemble(profile, ell, Variant.LINEARIZED, h=h, angular=angular)
    phi = profile.evaluate(op.grid)[1]
    bc = None if dirichlet else (0.0, float(profile.evaluate(op.domain.T)[1]))
    return op, phi, op.apply(phi, bc)


def check_phi_in_kernel(profile: RadialProfile, *, h: Optional[float] = None,
                        constant: float = KERNEL_IMAGE_CONSTANT, mutation=None) -> CheckReport:
    """Discrete ``L Phi = 0``: the l=1 operator maps ``u'`` to ``O(h^2)``.

    The weighted norm of the image is compared with ``constant * h^2`` after
    normalizing ``u'`` to unit weighted norm.  The stencil uses the true value
    ``u'(T_max)``; the image of the Dirichlet-truncated operator, which also
    carries the ``O(e^{-c T_max} / h^2)`` cut-off error, is reported.  The l=0
    operator applied to the same samples is a negative control.
    """
    if profile.kind != ProfileKind.FULL_SPACE:
        raise ConfigurationError("check_phi_in_kernel needs the whole-space ground state")
    op, phi, img = kernel_image(profile, 1, h=h, mutation=mutation)
    norm = op.weighted_norm(img) / op.weighted_norm(phi)
    op0, phi0, img0 = kernel_image(profile, 0, h=h)
    control = op0.weighted_norm(img0) / op0.weighted_norm(phi0)
    _, _, img_d = kernel_image(profile, 1, h=h, mutation=mutation, dirichlet=True)
    hh = op.h
    return CheckReport.make("phi_in_kernel", norm, constant * hh * hh, h=hh,
                            dirichlet_image_norm=op.weighted_norm(img_d) / op.weighted_norm(phi),
                            image_constant=norm / (hh * hh), control_norm_l0=control,
                            mutation=None if mutation is None else Mutation(mutation).value)


def observe_ball_kernel(profile: RadialProfile, *, tolerance: float = 1e-2) -> CheckReport:
    """On a ball the l=1 operator still annihilates ``u'`` inside, but ``u'(T) != 0``.

    ``max_error`` is the image norm relative to ``u'`` with the true boundary
    value in the stencil; the norm with the Dirichlet condition imposed and
    ``u'(T)`` are reported alongside.
    """
    if profile.kind != ProfileKind.BALL:
        raise ConfigurationError("observe_ball_kernel needs a ball profile")
    op, phi, img = kernel_image(profile, 1)
    rel = op.weighted_norm(img) / op.weighted_norm(phi)
    _, _, img_d = kernel_image(profile, 1, dirichlet=True)
    rel_d = op.weighted_norm(img_d) / op.weighted_norm(phi)
    duT = float(profile.du[-1])
    return CheckReport.make("ball_kernel_boundary", rel, tolerance, boundary_derivative=duT,
                            dirichlet_violated=bool(abs(duT) > 1e-8), h=op.h,
                            dirichlet_image_norm=rel_d)


def bump(center: float, width: float, n: int = 4001) -> RadialFunction:
    """``exp(-1/(1-s^2))``, ``s = (t-c)/w``, sampled on ``[0, c+w]`` with its exact derivative."""
    t = np.linspace(0.0, center + width, n)
    s = (t - center) / width
    u = np.zeros_like(t)
    du = np.zeros_like(t)
    inside = np.abs(s) < 1.0
    q = 1.0 - s[inside] ** 2
    u[inside] = np.exp(-1.0 / q)
    du[inside] = u[inside] * (-2.0 * s[inside] / q ** 2) / width
    return RadialFunction(t, u, du)


BUMP_FAMILY = ((0.0, 0.5), (0.0, 1.0), (0.0, 2.0), (1.0, 0.5), (1.5, 1.0),
               (2.0, 1.0), (3.0, 0.5), (3.0, 2.0), (5.0, 1.0), (8.0, 3.0))


def bump_family() -> list:
    return [bump(c, w) for c, w in BUMP_FAMILY]


def rayleigh_quotient(f, N: int, p: float) -> float:
    """``int |u'|^2 - ((N-1)/2)^2 u^2`` over ``(int |u|^{p+1})^{2/(p+1)}``, hyperbolic measure."""
    f = f if isinstance(f, RadialFunction) else RadialFunction.from_profile(f)
    m2 = ((N - 1) / 2.0) ** 2
    num = radial_integral(f.t, f.du ** 2 - m2 * f.u ** 2, N, check_growth=False).value
    den = radial_integral(f.t, np.abs(f.u) ** (p + 1), N, check_growth=False).value
    if den <= 0:
        raise DomainError("test function has zero L^{p+1} norm")
    return num / den ** (2.0 / (p + 1))


def poincare_sobolev_rayleigh(test_functions: Iterable, N: int, p: float) -> CheckReport:
    """Positivity of the Poincare-Sobolev quotient over a family of radial test functions.

    ``max_error`` is ``-min R``, so the check passes when every quotient is
    non-negative; the minimum is reported as what the family certifies.
    """
    if N < 2 or p <= 1 or (N >= 3 and p > (N + 2) / (N - 2)):
        raise ConfigurationError("exponent outside the Poincare-Sobolev range")
    values, skipped = [], []
    for k, f in enumerate(test_functions):
        try:
            values.append(rayleigh_quotient(f, N, p))
        except DomainError as exc:
            skipped.append({"index": k, "reason": str(exc)})
    if not values:
        raise ConfigurationError("no usable test functions")
    r_min = min(values)
    return CheckReport.make("poincare_sobolev", -r_min, 0.0, N=N, p=p, family_minimum=r_min,
                            quotients=values, skipped=skipped)


def ground_state_rayleigh_identity(profile: RadialProfile, tolerance: float = 1e-6) -> CheckReport:
    """Quotient of ``U`` directly versus through the weak form ``int |U'|^2 = lambda int U^2 + int U^{p+1}``."""
    params = profile.params
    N, p = params.N, params.p
    direct = rayleigh_quotient(profile, N, p)
    wf = weak_form(profile)
    m2 = ((N - 1) / 2.0) ** 2
    via = (wf.nonlinear - (m2 - params.lam) * wf.mass) / wf.nonlinear ** (2.0 / (p + 1))
    err = abs(direct - via) / abs(via)
    return CheckReport.make("ground_state_rayleigh_identity", err, tolerance, direct=direct, weak_form=via)


@dataclass(frozen=True)
class Manifest:
    reports: tuple
    seed: int

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    def as_dict(self) -> dict:
        return {"seed": self.seed, "all_passed": self.passed,
                "checks": [r.as_dict() for r in self.reports]}


def run_suite(profile: RadialProfile, *, seed: int = 0, b_norm: float = 0.3, sample_count: int = 200,
              mutation=None) -> Manifest:
    """Every check applicable to a whole-space ground state."""
    N, p = profile.params.N, profile.params.p
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(N)
    b = b_norm * direction / np.linalg.norm(direction)
    reports = [
        check_isometry_invariance(profile, b, sample_count, seed=seed, mutation=mutation),
        *(check_kernel_formula(profile, i, sample_count, seed=seed + i, mutation=mutation)
          for i in range(1, N + 1)),
        check_phi_in_kernel(profile, mutation=mutation),
        poincare_sobolev_rayleigh([*bump_family(), RadialFunction.from_profile(profile)], N, p),
        ground_state_rayleigh_identity(profile),
    ]
    return Manifest(reports=tuple(reports), seed=seed)
