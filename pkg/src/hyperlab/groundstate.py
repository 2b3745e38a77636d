"""Shooting for the positive radial ground state on the whole space and on geodesic balls."""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import BPoly

from .errors import (
    BracketError,
    ConfigurationError,
    DomainError,
    IndeterminateError,
    RadiusError,
)
from .ode import (
    IntegrationControls,
    ProblemParams,
    TrajectoryTag,
    classify,
    default_horizon,
    effective_lambda,
    integrate,
    launch_time,
    series_start,
    tail_rate,
    tail_tolerance,
    _profile_power,
)

log = logging.getLogger(__name__)


class ProfileKind(str, enum.Enum):
    FULL_SPACE = "FullSpace"
    BALL = "Ball"


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Samples ``(t, u, u', u'')`` of a radial solution.

    ``grid`` is ``[t0, h, 2h, ..., T]``: the launch point followed by a
    uniform grid.  ``lam_eff`` holds ``lambda - epsilon U^{p-1}`` at the nodes
    and ``coupling`` the coefficient of the nonlinearity, so the stored data
    are enough to re-evaluate the ODE residual.
    """

    params: ProblemParams
    grid: np.ndarray
    u: np.ndarray
    du: np.ndarray
    ddu: np.ndarray
    lam_eff: np.ndarray
    amplitude: float
    origin_curvature: float
    h: float
    kind: ProfileKind = ProfileKind.FULL_SPACE
    radius: Optional[float] = None
    coupling: float = 1.0
    fitted_decay: Optional[float] = None
    meta: dict = field(default_factory=dict)
    reference: Optional["RadialProfile"] = field(default=None, repr=False)

    @property
    def t0(self) -> float:
        return float(self.grid[0])

    @property
    def T(self) -> float:
        return float(self.grid[-1])

    @property
    def interp_range(self):
        return 0.0, self.T

    @cached_property
    def _splines(self):
        return {}

    def spline(self, order: int = 3):
        if order not in (3, 5):
            raise ValueError("interpolation order must be 3 or 5")
        cache = self._splines
        if order not in cache:
            x = np.concatenate([[0.0], self.grid])
            u = np.concatenate([[self.amplitude], self.u])
            du = np.concatenate([[0.0], self.du])
            if order == 3:
                y = np.column_stack([u, du])
            else:
                ddu = np.concatenate([[self.origin_curvature], self.ddu])
                y = np.column_stack([u, du, ddu])
            cache[order] = BPoly.from_derivatives(x, y)
        return cache[order]

    def evaluate(self, t, order: int = 5):
        """Return ``(u, u', u'')`` at ``t`` from the Hermite interpolant."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.T * (1 + 1e-12)):
            raise DomainError("evaluation outside the profile range")
        s = self.spline(order)
        t = np.clip(t, 0.0, self.T)
        return s(t), s(t, 1), s(t, 2)

    @property
    def uniform_start(self) -> int:
        """Index of the first node of the uniform ``h``-spaced tail of ``grid``."""
        d = np.diff(self.grid)
        bad = np.nonzero(np.abs(d - self.h) > 1e-9 * self.h)[0]
        return int(bad[-1] + 1) if bad.size else 0


def _rhs_second(params: ProblemParams, t, u, du, lam_eff, coupling):
    return -(params.N - 1) / np.tanh(t) * du - lam_eff * u - coupling * np.abs(u) ** (params.p - 1) * u


def _make_grid(h: float, T: float, t0: float) -> np.ndarray:
    n = int(round(T / h))
    if n < 8 or abs(n * h - T) > 1e-9 * max(1.0, T):
        raise ConfigurationError(f"T={T} must be an integer multiple (>= 8) of h={h}")
    if not 0 < t0 < h:
        raise ConfigurationError("launch time t0 must lie in (0, h)")
    grid = np.concatenate([[t0], h * np.arange(1, n + 1)])
    grid[-1] = T
    return grid


def _lam_eff_nodes(params: ProblemParams, t: np.ndarray, U) -> np.ndarray:
    if params.epsilon == 0.0:
        return np.full_like(t, params.lam)
    power = _profile_power(U, params)
    return params.lam - params.epsilon * np.array([power(float(x)) for x in t])


def _build_profile(params, a, grid, traj_u, traj_du, *, h, U, coupling, kind, radius, meta):
    lam_eff = _lam_eff_nodes(params, grid, U)
    ddu = _rhs_second(params, grid, traj_u, traj_du, lam_eff, coupling)
    lam0 = effective_lambda(params, 0.0, U) if params.epsilon else params.lam
    c0 = -(lam0 * a + coupling * a ** params.p) / params.N
    return RadialProfile(params=params, grid=grid, u=np.asarray(traj_u, float),
                         du=np.asarray(traj_du, float), ddu=ddu, lam_eff=lam_eff,
                         amplitude=float(a), origin_curvature=c0, h=float(h), kind=kind,
                         radius=radius, coupling=float(coupling), meta=meta,
                         reference=U if params.epsilon > 0 else None)


def origin_scale(params: ProblemParams, a: float) -> float:
    """Length scale ``a^{-(p-1)/2}`` over which a shot of amplitude ``a`` varies near 0."""
    if a <= 0:
        return math.inf
    return a ** (-(params.p - 1) / 2.0)


def profile_grid(params: ProblemParams, a: float, h: float, T: float, t0: float,
                 per_scale: float = 25.0) -> np.ndarray:
    """Sampling grid ``[t0, ..., T]`` for a profile of amplitude ``a``.

    Uniform with step ``h``, except that concentrated profiles (origin scale
    below ``per_scale * h``) get a graded start with local spacing
    ``max(scale, t) / per_scale`` up to ``t = per_scale * h``.
    """
    uniform = _make_grid(h, T, t0)
    scale = origin_scale(params, a)
    if scale >= per_scale * h:
        return uniform
    t_g = per_scale * h
    pts = [0.0]
    while pts[-1] < t_g:
        pts.append(pts[-1] + max(scale, pts[-1]) / per_scale)
    graded = np.asarray(pts[1:]) * (t_g / pts[-1])
    first = min(t0, 0.5 * graded[0])
    tail = uniform[1:][uniform[1:] > t_g * (1 + 1e-12)]
    return np.concatenate([[first], graded, tail])


def _coupling_for(params: ProblemParams, coupling: Optional[float], U) -> float:
    if params.epsilon > 0 and U is None:
        raise ConfigurationError("epsilon > 0 requires the unperturbed profile U")
    if coupling is None:
        return 1.0 + params.epsilon
    return float(coupling)


@dataclass(frozen=True)
class ShootingOptions:
    h: float = 0.01
    t0: float = 1e-4
    T_max: float = 15.0
    horizon: Optional[float] = None
    rtol: float = 1e-13
    scan_lo: float = 1e-3
    scan_hi: float = 1e3
    scan_points: int = 25
    bracket_rtol: float = 1e-12


def _shoot(params, a, t_end, opts, U, coupling, *, nodes=None, stop_at_zero=True):
    t0 = launch_time(params, a, opts.t0, U, coupling)
    if nodes is not None:
        t0 = min(t0, float(nodes[0]))
    start = series_start(params, a, t0, U, coupling)
    ctl = IntegrationControls(rtol=opts.rtol, stop_at_zero=stop_at_zero)
    return integrate(params, start, t_end, ctl, nodes=nodes, U=U, coupling=coupling)


def amplitude_scan(params, opts: ShootingOptions = ShootingOptions(), U=None, coupling=None):
    """Classify shots on a log-spaced amplitude grid; returns ``[(a, TrajectoryClass)]``.

    Stops after the first CrossesZero that follows a SlowDecay.
    """
    coupling = _coupling_for(params, coupling, U)
    horizon = opts.horizon or default_horizon(params)
    out = []
    for a in np.logspace(math.log10(opts.scan_lo), math.log10(opts.scan_hi), opts.scan_points):
        traj = _shoot(params, float(a), horizon, opts, U, coupling)
        cls = classify(params, traj)
        out.append((float(a), cls))
        if cls.tag == TrajectoryTag.CROSSES_ZERO and any(
                c.tag == TrajectoryTag.SLOW_DECAY for _, c in out[:-1]):
            break
    return out


def find_ground_state(params: ProblemParams, opts: ShootingOptions = ShootingOptions(), *,
                      U: Optional[RadialProfile] = None,
                      coupling: Optional[float] = None) -> RadialProfile:
    """Shoot for the positive finite-energy solution.

    The amplitude is bracketed between a SlowDecay and a CrossesZero shot and
    bisected to ``opts.bracket_rtol``.  For ``params.epsilon > 0`` the
    equation is the perturbed one with ``lambda - epsilon U^{p-1}`` and
    nonlinearity coefficient ``coupling`` (default ``1 + epsilon``).
    """
    coupling = _coupling_for(params, coupling, U)
    _make_grid(opts.h, opts.T_max, opts.t0)
    scan = amplitude_scan(params, opts, U, coupling)
    lo = hi = None
    for (a0, c0), (a1, c1) in zip(scan, scan[1:]):
        if c0.tag == TrajectoryTag.SLOW_DECAY and c1.tag == TrajectoryTag.CROSSES_ZERO:
            lo, hi = a0, a1
    if lo is None:
        tags = ", ".join(f"{a:.3g}:{c.tag.value}" for a, c in scan)
        raise BracketError(f"no SlowDecay/CrossesZero bracket in [{opts.scan_lo}, {opts.scan_hi}]: {tags}")

    gp = params.gamma_plus
    t_side = max(opts.T_max, 15.0)

    def above(a):
        traj = _shoot(params, a, t_side, opts, U, coupling)
        if traj.crossed or traj.blew_up:
            return True
        return traj.du[-1] + gp * traj.u[-1] < 0

    iterations = 0
    while hi - lo > opts.bracket_rtol * hi:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if above(mid):
            hi = mid
        else:
            lo = mid
        iterations += 1
    a_star = 0.5 * (lo + hi)

    grid = profile_grid(params, a_star, opts.h, opts.T_max, opts.t0)
    traj = _shoot(params, a_star, opts.T_max, opts, U, coupling, nodes=grid, stop_at_zero=True)
    if traj.crossed or traj.node_u.size != grid.size:
        raise IndeterminateError(
            f"ground-state candidate a*={a_star!r} leaves positivity before T_max={opts.T_max}; "
            "shorten T_max")
    rate = tail_rate(traj)
    if abs(rate + gp) >= tail_tolerance(params):
        raise IndeterminateError(f"candidate tail rate {rate:.6g} is not -gamma_plus={-gp:.6g}")
    meta = {"bracket": [lo, hi], "bisection_iterations": iterations, "tail_rate": rate,
            "scan": [[a, c.tag.value] for a, c in scan]}
    prof = _build_profile(params, a_star, grid, traj.node_u, traj.node_du, h=opts.h, U=U,
                          coupling=coupling, kind=ProfileKind.FULL_SPACE, radius=None, meta=meta)
    fit = decay_rate(prof)
    object.__setattr__(prof, "fitted_decay", fit.u_slope)
    prof.meta["residual_norm"] = residual_norm(prof)
    log.info("ground state N=%s p=%s lambda=%s: a*=%.15g", params.N, params.p, params.lam, a_star)
    return prof


def first_zero(params, a, T_probe, opts=ShootingOptions(), U=None, coupling=None) -> float:
    """First zero of the shot with amplitude ``a`` (``inf`` if none before ``T_probe``)."""
    coupling = _coupling_for(params, coupling, U)
    traj = _shoot(params, a, T_probe, opts, U, coupling)
    return traj.t_cross if traj.crossed else math.inf


BOUNDARY_TOL = 1e-10


def solve_ball(params: ProblemParams, T: float, opts: ShootingOptions = ShootingOptions(), *,
               U: Optional[RadialProfile] = None, coupling: Optional[float] = None) -> RadialProfile:
    """Positive Dirichlet solution on the geodesic ball of radius ``T``."""
    if not T > 0:
        raise DomainError("ball radius must be positive")
    coupling = _coupling_for(params, coupling, U)
    _make_grid(opts.h, T, opts.t0)
    amps = np.logspace(math.log10(opts.scan_lo), math.log10(opts.scan_hi), opts.scan_points)
    lo = hi = None
    z_hi = None
    for a in amps:
        z = first_zero(params, float(a), T, opts, U, coupling)
        if z <= T:
            hi, z_hi = float(a), z
            break
        lo = float(a)
    if hi is None or lo is None:
        raise RadiusError(f"no amplitude in [{opts.scan_lo}, {opts.scan_hi}] places the first zero at T={T}")

    history = []
    while True:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi) or hi - lo < 1e-15 * hi:
            break
        z = first_zero(params, mid, T, opts, U, coupling)
        if z <= T:
            hi, z_hi = mid, z
            history.append((mid, z))
        else:
            lo = mid
        if z_hi is not None and T - z_hi < 1e-11 and hi - lo < 1e-13 * hi:
            break
    # iterates closer than the integration tolerance carry no ordering information
    resolved = [(a, z) for a, z in history if a - lo > 10 * opts.rtol * hi]
    tail = resolved[-10:]
    for (a0, z0), (a1, z1) in zip(tail, tail[1:]):
        if not (a1 < a0 and z1 >= z0):
            raise RadiusError("first-zero location is not monotone in the amplitude bracket")
    grid = profile_grid(params, hi, opts.h, T, opts.t0)
    traj = _shoot(params, hi, T, opts, U, coupling, nodes=grid, stop_at_zero=False)
    if abs(traj.node_u[-1]) > BOUNDARY_TOL:
        raise RadiusError(f"bisection stalled with u(T) = {traj.node_u[-1]!r} at T={T}")
    meta = {"bracket": [lo, hi], "first_zero": z_hi,
            "zero_history": [[a, z] for a, z in tail]}
    prof = _build_profile(params, hi, grid, traj.node_u, traj.node_du, h=opts.h, U=U,
                          coupling=coupling, kind=ProfileKind.BALL, radius=float(T), meta=meta)
    prof.meta["residual_norm"] = residual_norm(prof)
    prof.meta["boundary_value"] = float(prof.u[-1])
    return prof


def ball_uniqueness_scan(params: ProblemParams, T: float, amplitudes=None,
                         opts: ShootingOptions = ShootingOptions()):
    """Sign changes of ``first_zero(a) - T`` over a log grid of 50 amplitudes."""
    if amplitudes is None:
        amplitudes = np.logspace(math.log10(opts.scan_lo), math.log10(opts.scan_hi), 50)
    signs = []
    for a in amplitudes:
        z = first_zero(params, float(a), T, opts)
        signs.append(1 if z > T else -1)
    changes = sum(1 for s0, s1 in zip(signs, signs[1:]) if s0 != s1)
    return changes, list(zip(map(float, amplitudes), signs))


@dataclass(frozen=True)
class DecayFit:
    u_slope: float
    u2_slope: float
    predicted_u_slope: Optional[float]
    predicted_u2_slope: Optional[float]
    window: tuple
    n_points: int
    truncated: bool

    @property
    def relative_error(self) -> float:
        return abs(self.u2_slope - self.predicted_u2_slope) / abs(self.predicted_u2_slope)


def fit_decay(t, u, *, fraction: float = 0.3, floor: float = 1e-250):
    """Least-squares slope of ``log u`` over the last ``fraction`` of ``t``."""
    t = np.asarray(t, float)
    u = np.asarray(u, float)
    start = t[0] + (1.0 - fraction) * (t[-1] - t[0])
    sel = t >= start
    good = sel & (u > floor)
    truncated = bool(np.any(sel & ~good))
    if good.sum() < 3:
        raise DomainError("too few positive samples in the decay window")
    slope = np.polyfit(t[good], np.log(u[good]), 1)[0]
    return float(slope), (float(t[good][0]), float(t[good][-1])), int(good.sum()), truncated


def decay_rate(profile: RadialProfile) -> DecayFit:
    if profile.kind != ProfileKind.FULL_SPACE:
        raise ConfigurationError("decay rate is defined for whole-space profiles only")
    slope, window, n, truncated = fit_decay(profile.grid, profile.u)
    gp = profile.params.gamma_plus
    return DecayFit(u_slope=slope, u2_slope=2.0 * slope, predicted_u_slope=-gp,
                    predicted_u2_slope=-2.0 * gp, window=window, n_points=n, truncated=truncated)


def local_defects(profile: RadialProfile, rtol: float = 1e-13) -> np.ndarray:
    """Scaled one-interval defects of the stored samples.

    Each interval ``[t_i, t_{i+1}]`` is re-integrated from the stored
    ``(u_i, u'_i)``; the mismatch at ``t_{i+1}`` is converted to units of
    ``u''`` as ``max(2|du| / h_i^2, |du'| / h_i)`` and divided by
    ``max(1, |u_{i+1}|^p)``.
    """
    params = profile.params
    t_i = profile.grid[:-1]
    h_i = np.diff(profile.grid)
    n = t_i.size
    if n == 0:
        return np.zeros(0)
    q = params.p - 1.0
    N1 = params.N - 1
    coupling = profile.coupling
    ref = profile.reference
    if params.epsilon > 0:
        if ref is None:
            raise ConfigurationError("perturbed profile lacks its reference profile U")
        upow = np.vectorize(_profile_power(ref, params))
    lam = params.lam

    def f(s, y):
        u = y[:n]
        du = y[n:]
        t = t_i + s * h_i
        lam_t = lam - params.epsilon * upow(t) if params.epsilon > 0 else lam
        ddu = -N1 / np.tanh(t) * du - lam_t * u - coupling * np.abs(u) ** q * u
        return np.concatenate([h_i * du, h_i * ddu])

    y0 = np.concatenate([profile.u[:-1], profile.du[:-1]])
    sol = solve_ivp(f, (0.0, 1.0), y0, method="DOP853", rtol=rtol, atol=1e-30)
    end = sol.y[:, -1]
    d_u = np.abs(end[:n] - profile.u[1:])
    d_du = np.abs(end[n:] - profile.du[1:])
    raw = np.maximum(2.0 * d_u / h_i ** 2, d_du / h_i)
    return raw / np.maximum(1.0, np.abs(profile.u[1:]) ** params.p)


def residual_norm(profile: RadialProfile) -> float:
    """Maximum of :func:`local_defects`: how far the samples are from an exact ODE solution."""
    d = local_defects(profile)
    return float(np.max(d)) if d.size else 0.0


def profile_from_samples(params: ProblemParams, grid, u, du, *, amplitude: float, h: float,
                         kind: ProfileKind = ProfileKind.FULL_SPACE, radius=None,
                         coupling: float = 1.0, fitted_decay=None, U=None, meta=None) -> RadialProfile:
    """Rebuild a profile from stored samples (used by deserialization)."""
    grid = np.asarray(grid, float)
    prof = _build_profile(params, amplitude, grid, np.asarray(u, float), np.asarray(du, float),
                          h=h, U=U, coupling=coupling, kind=kind, radius=radius, meta=dict(meta or {}))
    object.__setattr__(prof, "fitted_decay", fitted_decay)
    return prof


def scaled_profile(profile: RadialProfile, factor: float, *, epsilon: float = 0.0,
                   U: Optional[RadialProfile] = None, coupling: float = 1.0) -> RadialProfile:
    """``factor * profile`` re-labelled as a solution of a (possibly perturbed) equation.

    ``(1+eps)^{1/(p-1)} U`` solves the normalized perturbed equation with
    ``lambda - eps U^{p-1}`` and unit nonlinearity coefficient.
    """
    params = profile.params.with_epsilon(epsilon)
    return profile_from_samples(params, profile.grid, factor * profile.u, factor * profile.du,
                                amplitude=factor * profile.amplitude, h=profile.h, kind=profile.kind,
                                radius=profile.radius, coupling=coupling,
                                fitted_decay=profile.fitted_decay, U=U if epsilon else None)
