"""Auxiliary energy, the perturbed action functional and the conformal change.

With ``u`` a positive radial solution of the normalized perturbed equation
``u'' + (N-1) coth(t) u' + (lambda - eps U^{p-1}) u + u^p = 0`` and
``uh = sinh^alpha(t) u`` the energy

    E(t) = 1/2 sinh^beta(t) uh'^2 + |uh|^{p+1}/(p+1) + 1/2 G(t) uh^2

satisfies ``E' = 1/2 G' uh^2``, so the sign of ``G'`` controls its
monotonicity.  All integrals over the ball are written in geodesic polar
coordinates and include the sphere area ``omega_{N-1}``; angular factors of
non-radial test functions are normalized to unit mean square on the sphere.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import brentq

from .errors import ConfigurationError, DomainError
from .groundstate import ProfileKind, RadialProfile
from .ode import ProblemParams, Regime, two_d_threshold
from .spectral import angular_eigenvalue

DEFAULT_SCAN = (0.01, 10.0, 2000)
# log-spaced samples below the scan window; concentrated profiles flip sign there
ORIGIN_SAMPLES = 50
EPSILON_LADDER = (1e-6, 1e-5, 1e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1)


class EnergyCase(enum.IntEnum):
    """Which line of the sign claim for ``G'`` applies."""

    TWO_D = 1
    SUBCRITICAL_LOW = 2
    SUBCRITICAL_HIGH = 3
    CRITICAL = 4


EXPECTED_PATTERN = {
    EnergyCase.TWO_D: "negative",
    EnergyCase.SUBCRITICAL_LOW: "one change + to -",
    EnergyCase.SUBCRITICAL_HIGH: "positive",
    EnergyCase.CRITICAL: "positive",
}


@dataclass(frozen=True)
class EnergyConstants:
    alpha: float
    beta: float
    A: float
    B: float
    case_id: Optional[EnergyCase]
    case_boundary: Optional[float] = None

    @property
    def t1_unperturbed(self) -> Optional[float]:
        """Zero of ``G'`` at ``eps = 0`` where it exists (``sinh^2 t = -B(beta-2)/(beta A)``)."""
        if self.A == 0 or self.beta == 0:
            return None
        s2 = -self.B * (self.beta - 2) / (self.beta * self.A)
        return float(np.arcsinh(math.sqrt(s2))) if s2 > 0 else None

    def as_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "A": self.A, "B": self.B,
                "case_id": None if self.case_id is None else int(self.case_id),
                "expected_pattern": None if self.case_id is None else EXPECTED_PATTERN[self.case_id],
                "case_boundary": self.case_boundary}


def subcritical_case_boundary(N: int, p: float) -> float:
    return 2.0 * (N - 1) ** 2 * (p + 1) / (p + 3) ** 2


def constants(params: ProblemParams) -> EnergyConstants:
    N, p, lam = params.N, params.p, params.lam
    alpha = 2.0 * (N - 1) / (p + 3)
    beta = alpha * (p - 1)
    A = lam - alpha ** 2 * (p + 1) / 2.0
    B = alpha / 2.0 * (2.0 - alpha * (p + 1))
    case, bound = None, None
    if N == 2:
        bound = two_d_threshold(p)
        case = EnergyCase.TWO_D if lam < bound else None
    elif params.regime == Regime.CRITICAL:
        bound = N * (N - 2) / 4.0
        case = EnergyCase.CRITICAL if lam > bound else None
        beta = 2.0  # exact value; avoids a 1 ulp drift in sinh^(beta-2)
    else:
        bound = subcritical_case_boundary(N, p)
        case = EnergyCase.SUBCRITICAL_LOW if lam < bound else EnergyCase.SUBCRITICAL_HIGH
    return EnergyConstants(alpha=alpha, beta=beta, A=A, B=B, case_id=case, case_boundary=bound)


def _U_terms(U: Optional[RadialProfile], t: np.ndarray, p: float):
    vals, d1, _ = U.evaluate(t)
    vals = np.maximum(vals, 0.0)
    return vals ** (p - 1), vals ** (p - 2) * d1


def G(params: ProblemParams, consts: EnergyConstants, t, U: Optional[RadialProfile] = None,
      epsilon: Optional[float] = None):
    """``G`` and ``G'`` at ``t > 0``.

    ``G = (A - eps U^{p-1}) sinh^beta t + B sinh^{beta-2} t``; ``G'`` uses the
    expanded derivative with ``U'`` from the profile.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("G is defined for t > 0 only")
    eps = params.epsilon if epsilon is None else float(epsilon)
    if eps > 0 and U is None:
        raise ConfigurationError("epsilon > 0 requires the unperturbed profile U")
    a, b, A, B = consts.alpha, consts.beta, consts.A, consts.B
    s, c = np.sinh(t), np.cosh(t)
    Up, Ud = (_U_terms(U, t, params.p) if eps > 0 else (0.0, 0.0))
    g = (A - eps * Up) * s ** b + B * s ** (b - 2)
    gp = (A * b * s ** (b - 1) * c + B * (b - 2) * s ** (b - 3) * c
          - eps * (params.p - 1) * Ud * s ** b - eps * b * Up * s ** (b - 1) * c)
    return g, gp


def G_prime_reduced(params, consts, t, U=None, epsilon=None):
    """``G' / (beta sinh^{beta-3} t cosh t)``, which has the same sign and no singularity."""
    t = np.asarray(t, dtype=float)
    eps = params.epsilon if epsilon is None else float(epsilon)
    b = consts.beta
    s = np.sinh(t)
    Up, Ud = (_U_terms(U, t, params.p) if eps > 0 else (0.0, 0.0))
    return ((consts.A - eps * Up - eps * (params.p - 1) / b * Ud * np.tanh(t)) * s * s
            + consts.B * (b - 2) / b)


@dataclass(frozen=True, eq=False)
class EnergyTrace:
    grid: np.ndarray
    E_hat: np.ndarray
    G: np.ndarray
    Gprime: np.ndarray
    u_hat: np.ndarray
    du_hat: np.ndarray
    constants: EnergyConstants
    epsilon: float
    h: float
    sign_changes: tuple = ()

    def rows(self):
        return zip(self.grid, self.E_hat, self.G, self.Gprime)


def normalized_solution(U: RadialProfile, epsilon: float):
    """Scale factor ``(1+eps)^{1/(p-1)}`` taking ``U`` to the solution with unit coupling."""
    return (1.0 + epsilon) ** (1.0 / (U.params.p - 1.0))


def energy_grid(profile: RadialProfile, h: Optional[float] = None, t_min: Optional[float] = None):
    h = profile.h if h is None else float(h)
    n = int(math.floor(profile.T / h + 1e-9))
    t = h * np.arange(1, n + 1)
    if t_min is not None:
        t = np.concatenate([[t_min], t[t > t_min]])
    return t, h


def E_hat(profile: RadialProfile, consts: Optional[EnergyConstants] = None, epsilon: float = 0.0, *,
          h: Optional[float] = None, t_min: Optional[float] = None) -> EnergyTrace:
    """Auxiliary energy along the uniform grid ``t_i = i h``.

    ``profile`` is the ground state ``U``.  For ``eps > 0`` the energy is taken
    along ``(1+eps)^{1/(p-1)} U``, the positive solution of the normalized
    perturbed equation.  ``t_min`` prepends one extra sample, e.g. ``10 t0``.
    """
    if profile.kind != ProfileKind.FULL_SPACE or profile.params.epsilon != 0:
        raise ConfigurationError("E_hat expects the unperturbed whole-space ground state")
    params = profile.params
    consts = constants(params) if consts is None else consts
    t, h = energy_grid(profile, h, t_min)
    u, du, _ = profile.evaluate(t)
    k = normalized_solution(profile, epsilon)
    u, du = k * u, k * du
    a, b, p = consts.alpha, consts.beta, params.p
    s, c = np.sinh(t), np.cosh(t)
    uh = s ** a * u
    duh = a * s ** (a - 1) * c * u + s ** a * du
    g, gp = G(params, consts, t, profile if epsilon > 0 else None, epsilon)
    E = 0.5 * s ** b * duh ** 2 + np.abs(uh) ** (p + 1) / (p + 1) + 0.5 * g * uh ** 2
    changes = sign_changes(params, consts, t, gp, profile if epsilon > 0 else None, epsilon)
    return EnergyTrace(grid=t, E_hat=E, G=g, Gprime=gp, u_hat=uh, du_hat=duh, constants=consts,
                       epsilon=float(epsilon), h=h, sign_changes=tuple(changes))


def sign_changes(params, consts, t, gp, U=None, epsilon=0.0, xtol: float = 1e-12) -> list:
    """Zeros of ``G'`` between consecutive opposite-sign samples, refined by Brent's method."""
    t = np.asarray(t, float)
    gp = np.asarray(gp, float)
    out = []
    idx = np.nonzero(np.sign(gp[:-1]) * np.sign(gp[1:]) < 0)[0]

    def f(x):
        return float(G_prime_reduced(params, consts, x, U, epsilon))

    for i in idx:
        out.append(float(brentq(f, t[i], t[i + 1], xtol=xtol, rtol=4 * np.finfo(float).eps)))
    return out


def energy_identity_error(trace: EnergyTrace, t_min: float = 0.25):
    """Max ``|dE/dt - G' uh^2 / 2|`` with ``dE/dt`` by central differences on ``t >= t_min``.

    Returns ``(max_error, t_at_max)``.  Only the uniform part of the trace is used.
    """
    t, E = trace.grid, trace.E_hat
    uniform = np.abs(np.diff(t) - trace.h) < 1e-9 * trace.h
    start = int(np.argmax(uniform))
    t, E = t[start:], E[start:]
    rhs = 0.5 * trace.Gprime[start:] * trace.u_hat[start:] ** 2
    dE = (E[2:] - E[:-2]) / (t[2:] - t[:-2])
    err = np.abs(dE - rhs[1:-1])
    mask = t[1:-1] >= t_min
    if not np.any(mask):
        raise ConfigurationError("no interior samples beyond t_min")
    i = int(np.argmax(np.where(mask, err, -np.inf)))
    return float(err[i]), float(t[1:-1][i])


def origin_term(profile: RadialProfile, consts: EnergyConstants, t):
    """``(alpha^2+B)/2 sinh^{alpha(p+1)-2} t u^2``, the small-``t`` model of the energy in two dimensions."""
    u = profile.evaluate(np.asarray(t, float))[0]
    return 0.5 * (consts.alpha ** 2 + consts.B) * np.sinh(t) ** (consts.alpha * (profile.params.p + 1) - 2) * u ** 2


def energy_at(profile: RadialProfile, consts: EnergyConstants, t, epsilon: float = 0.0):
    """Energy at arbitrary points (no trace bookkeeping)."""
    t = np.atleast_1d(np.asarray(t, float))
    u, du, _ = profile.evaluate(t)
    k = normalized_solution(profile, epsilon)
    u, du = k * u, k * du
    a, b, p = consts.alpha, consts.beta, profile.params.p
    s, c = np.sinh(t), np.cosh(t)
    uh = s ** a * u
    duh = a * s ** (a - 1) * c * u + s ** a * du
    g, _ = G(profile.params, consts, t, profile if epsilon > 0 else None, epsilon)
    return 0.5 * s ** b * duh ** 2 + np.abs(uh) ** (p + 1) / (p + 1) + 0.5 * g * uh ** 2


@dataclass(frozen=True)
class PatternResult:
    case_id: Optional[EnergyCase]
    epsilon: float
    expected: str
    observed: str
    holds: bool
    sign_changes: tuple
    n_samples: int

    @property
    def t1(self) -> Optional[float]:
        return self.sign_changes[0] if len(self.sign_changes) == 1 else None

    def as_dict(self) -> dict:
        return {"case_id": None if self.case_id is None else int(self.case_id),
                "epsilon": self.epsilon, "expected": self.expected, "observed": self.observed,
                "holds": self.holds, "sign_changes": list(self.sign_changes),
                "n_samples": self.n_samples}


def _describe(values: np.ndarray, changes: Sequence[float]) -> str:
    if np.all(values > 0):
        return "positive"
    if np.all(values < 0):
        return "negative"
    if len(changes) == 1 and values[0] > 0 and values[-1] < 0:
        return "one change + to -"
    return f"{len(changes)} changes, starts {'+' if values[0] > 0 else '-'}"


def sign_pattern(profile: RadialProfile, epsilon: float = 0.0, scan=DEFAULT_SCAN) -> PatternResult:
    """Sample the sign of ``G'`` and compare with the claimed case.

    The samples are ``linspace(*scan)`` plus log-spaced points between the
    profile launch time and the start of the window.
    """
    params = profile.params
    consts = constants(params)
    lo, hi, n = scan
    hi = min(hi, profile.T)
    near = np.geomspace(min(profile.t0, lo / 10), lo, ORIGIN_SAMPLES + 1)[:-1]
    t = np.concatenate([near, np.linspace(lo, hi, int(n))])
    U = profile if epsilon > 0 else None
    red = G_prime_reduced(params, consts, t, U, epsilon)
    changes = sign_changes(params, consts, t, red, U, epsilon)
    observed = _describe(red, changes)
    expected = EXPECTED_PATTERN.get(consts.case_id, "unclaimed")
    return PatternResult(case_id=consts.case_id, epsilon=float(epsilon), expected=expected,
                         observed=observed, holds=observed == expected,
                         sign_changes=tuple(changes), n_samples=int(t.size))


@dataclass(frozen=True)
class EpsilonScan:
    results: tuple
    largest_preserving: Optional[float]

    @property
    def recommended(self) -> Optional[float]:
        """``min(0.01, largest preserving eps)``."""
        return None if self.largest_preserving is None else min(0.01, self.largest_preserving)


def epsilon_scan(profile: RadialProfile, ladder=EPSILON_LADDER, scan=DEFAULT_SCAN) -> EpsilonScan:
    """Report the largest tested ``eps`` for which the claimed sign pattern still holds.

    The ladder is walked upward and stops at the first failure, so the
    reported value is the top of an unbroken run starting at the smallest rung.
    """
    results = []
    best = None
    for eps in sorted(ladder):
        r = sign_pattern(profile, eps, scan)
        results.append(r)
        if not r.holds:
            break
        best = eps
    return EpsilonScan(results=tuple(results), largest_preserving=best)


def sphere_area(N: int) -> float:
    """Area ``2 pi^{N/2} / Gamma(N/2)`` of the unit sphere in R^N."""
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)


@dataclass(frozen=True)
class Quadrature:
    value: float
    tail: float

    def __float__(self) -> float:
        return self.value


def _tail_estimate(t: np.ndarray, f: np.ndarray) -> float:
    """Integral of the exponential fit through the last samples, from ``t[-1]`` to infinity."""
    m = min(20, t.size // 5)
    if m < 3:
        return 0.0
    tt, ff = t[-m:], f[-m:]
    if np.any(ff <= 0):
        return 0.0
    slope = np.polyfit(tt, np.log(ff), 1)[0]
    if slope >= 0:
        return math.inf
    return float(ff[-1] / -slope)


def radial_integral(t, f, N: int, *, check_growth: bool = True) -> Quadrature:
    """``omega_{N-1} int f(t) sinh^{N-1} t dt`` by composite Simpson on the samples.

    ``t`` should start at 0 or near it.  The exponential-model tail beyond the
    last sample is reported in ``tail`` but not added.
    """
    t = np.asarray(t, float)
    f = np.asarray(f, float)
    w = f * np.sinh(t) ** (N - 1)
    if check_growth:
        peak = np.max(np.abs(w))
        if peak > 0 and abs(w[-1]) > 1e-6 * peak and abs(w[-1]) >= np.max(np.abs(w[-max(3, t.size // 10):])) * 0.999:
            raise DomainError("integrand is not decaying at the end of the grid")
    om = sphere_area(N)
    return Quadrature(value=om * float(simpson(w, x=t)), tail=om * _tail_estimate(t, np.abs(w)))


@dataclass(frozen=True)
class RadialFunction:
    """Samples of a radial function and its derivative, ``t`` starting at 0."""

    t: np.ndarray
    u: np.ndarray
    du: np.ndarray

    @classmethod
    def from_profile(cls, profile: RadialProfile, factor: float = 1.0) -> "RadialFunction":
        t = np.concatenate([[0.0], profile.grid])
        u = np.concatenate([[profile.amplitude], profile.u])
        du = np.concatenate([[0.0], profile.du])
        return cls(t, factor * u, factor * du)


def profile_nodes(profile: RadialProfile) -> np.ndarray:
    return np.concatenate([[0.0], profile.grid])


def _as_function(obj) -> RadialFunction:
    if isinstance(obj, RadialFunction):
        return obj
    if isinstance(obj, RadialProfile):
        return RadialFunction.from_profile(obj)
    t, u, du = obj
    return RadialFunction(np.asarray(t, float), np.asarray(u, float), np.asarray(du, float))


def _U_power_at(U: RadialProfile, t: np.ndarray, p: float) -> np.ndarray:
    if t.size == U.grid.size + 1 and np.array_equal(t[1:], U.grid):
        vals = np.concatenate([[U.amplitude], U.u])
    else:
        vals = U.evaluate(t)[0]
    return np.maximum(vals, 0.0) ** (p - 1)


def I_eps(func, params: ProblemParams, U: Optional[RadialProfile] = None,
          epsilon: Optional[float] = None) -> float:
    """Perturbed action of a radial function (profile, ``RadialFunction`` or ``(t, u, du)``)."""
    f = _as_function(func)
    eps = params.epsilon if epsilon is None else float(epsilon)
    if eps > 0 and U is None:
        raise ConfigurationError("epsilon > 0 requires the unperturbed profile U")
    p, N = params.p, params.N
    lam_eff = params.lam - (eps * _U_power_at(U, f.t, p) if eps > 0 else 0.0)
    quad = radial_integral(f.t, f.du ** 2 - lam_eff * f.u ** 2, N)
    pos = np.maximum(f.u, 0.0)
    nonlin = radial_integral(f.t, pos ** (p + 1), N)
    return 0.5 * quad.value - (1 + eps) / (p + 1) * nonlin.value


@dataclass(frozen=True)
class WeakForm:
    """Integrals of the ground state entering the weak-form identities."""

    grad: float
    mass: float
    nonlinear: float
    tail: float

    def identity_error(self, lam: float) -> float:
        """Relative defect of ``int |U'|^2 - lam U^2 = int U^{p+1}``."""
        return abs(self.grad - lam * self.mass - self.nonlinear) / abs(self.nonlinear)


def weak_form(profile: RadialProfile) -> WeakForm:
    f = RadialFunction.from_profile(profile)
    N, p = profile.params.N, profile.params.p
    g = radial_integral(f.t, f.du ** 2, N)
    m = radial_integral(f.t, f.u ** 2, N)
    nl = radial_integral(f.t, np.abs(f.u) ** (p + 1), N)
    return WeakForm(grad=g.value, mass=m.value, nonlinear=nl.value, tail=g.tail + m.tail + nl.tail)


def second_variation(U: RadialProfile, t, phi, dphi, *, ell: int = 0, epsilon: float = 0.0) -> float:
    """Second variation of the perturbed action at ``U`` on ``phi(t) Y_ell``.

    ``int [phi'^2 + ell(ell+N-2) phi^2 / sinh^2 t - (lambda - eps U^{p-1}) phi^2
    - (1+eps) p U^{p-1} phi^2]`` with the sphere measure included.
    """
    params = U.params
    N, p = params.N, params.p
    t = np.asarray(t, float)
    phi = np.asarray(phi, float)
    dphi = np.asarray(dphi, float)
    Up = _U_power_at(U, t, p)
    ang = angular_eigenvalue(ell, N)
    with np.errstate(divide="ignore", invalid="ignore"):
        cent = np.where(t > 0, ang * phi ** 2 / np.sinh(t) ** 2, 0.0)
    f = dphi ** 2 + cent - (params.lam - epsilon * Up) * phi ** 2 - (1 + epsilon) * p * Up * phi ** 2
    return radial_integral(t, f, N).value


def kernel_radial_factor(U: RadialProfile):
    """``(t, u', u'')`` on the profile nodes: the radial factor of the translation modes."""
    t = profile_nodes(U)
    du = np.concatenate([[0.0], U.du])
    ddu = np.concatenate([[U.origin_curvature], U.ddu])
    return t, du, ddu


@dataclass(frozen=True, eq=False)
class ConformalProfile:
    """``v = (2/(1-r^2))^{(N-2)/2} u`` on the Euclidean radii ``r = tanh(t/2)``."""

    t: np.ndarray
    r: np.ndarray
    v: np.ndarray
    dv_dr: np.ndarray
    a: np.ndarray
    N: int
    p: float
    epsilon: float

    @property
    def a_positive(self) -> np.ndarray:
        return self.a > 0


def conformal_change(func, params: ProblemParams, U: Optional[RadialProfile] = None,
                     epsilon: Optional[float] = None) -> ConformalProfile:
    N = params.N
    if N < 3:
        raise ConfigurationError("the conformal change needs N >= 3")
    f = _as_function(func)
    eps = params.epsilon if epsilon is None else float(epsilon)
    if eps > 0 and U is None:
        raise ConfigurationError("epsilon > 0 requires the unperturbed profile U")
    t = f.t
    r = np.tanh(t / 2.0)
    one = 1.0 / np.cosh(t / 2.0) ** 2  # 1 - r^2 without cancellation
    psi = 2.0 / one
    k = (N - 2) / 2.0
    v = psi ** k * f.u
    # psi = 1 + cosh t, so d psi/dt = sinh t; and dt/dr = psi
    dv_dt = psi ** k * f.du + k * psi ** (k - 1) * np.sinh(t) * f.u
    lam_eff = params.lam - (eps * _U_power_at(U, t, params.p) if eps > 0 else 0.0)
    a = (lam_eff - N * (N - 2) / 4.0) * psi ** 2
    return ConformalProfile(t=t, r=r, v=v, dv_dr=dv_dt * psi, a=a, N=N, p=params.p, epsilon=eps)


def J_eps(cp: ConformalProfile) -> float:
    """Euclidean functional ``1/2 int |grad v|^2 - a v^2 dx - (1+eps)/2* int (v+)^{2*} dx``.

    Integrated in the ``t`` variable (``dr = dt / psi``) so the same nodes serve both sides.
    """
    N = cp.N
    crit = 2.0 * N / (N - 2)
    om = sphere_area(N)
    jac = cp.r ** (N - 1) * 0.5 / np.cosh(cp.t / 2.0) ** 2
    quad = simpson((cp.dv_dr ** 2 - cp.a * cp.v ** 2) * jac, x=cp.t)
    nl = simpson(np.maximum(cp.v, 0.0) ** crit * jac, x=cp.t)
    return float(om * (0.5 * quad - (1 + cp.epsilon) / crit * nl))
