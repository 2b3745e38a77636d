"""Radial ODE ``u'' + (N-1) coth(t) u' + lambda_eps u + |u|^{p-1} u = 0``.

Includes admissibility checks for ``(N, p, lambda)``, the Taylor launch off
the regular singular point ``t = 0``, adaptive integration and the shooting
classification of trajectories by their tail behaviour.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    ConfigurationError,
    DomainError,
    InadmissibleParams,
    IndeterminateError,
    StiffnessError,
)

BLOWUP_LEVEL = 1e8


class Regime(str, enum.Enum):
    SUBCRITICAL = "Subcritical"
    CRITICAL = "Critical"
    TWO_D = "TwoD"


def critical_exponent(N: int) -> float:
    return math.inf if N <= 2 else (N + 2) / (N - 2)


def is_critical(N: int, p: float) -> bool:
    if N <= 2:
        return False
    pc = critical_exponent(N)
    return abs(p - pc) <= 1e-12 * pc


def two_d_threshold(p: float) -> float:
    return 2.0 * (p + 1.0) / (p + 3.0) ** 2


@dataclass(frozen=True)
class ProblemParams:
    N: int
    p: float
    lam: float
    epsilon: float = 0.0
    regime: Regime = Regime.SUBCRITICAL

    @property
    def half_dim(self) -> float:
        """``(N-1)/2``; its square is the bottom of the spectrum of ``-Delta``."""
        return (self.N - 1) / 2.0

    @property
    def _disc(self) -> float:
        return math.sqrt((self.N - 1) ** 2 - 4.0 * self.lam)

    @property
    def gamma_plus(self) -> float:
        """Fast decay rate: finite-energy solutions behave like ``exp(-gamma_plus t)``."""
        return (self.N - 1 + self._disc) / 2.0

    @property
    def gamma_minus(self) -> float:
        return (self.N - 1 - self._disc) / 2.0

    def with_epsilon(self, epsilon: float) -> "ProblemParams":
        if epsilon < 0:
            raise ConfigurationError("epsilon must be non-negative")
        return ProblemParams(self.N, self.p, self.lam, float(epsilon), self.regime)

    def as_dict(self) -> dict:
        return {"N": self.N, "p": self.p, "lambda": self.lam,
                "epsilon": self.epsilon, "regime": self.regime.value}


def validate_params(N: int, p: float, lam: float, epsilon: float = 0.0) -> ProblemParams:
    """Classify ``(N, p, lambda)`` or raise :class:`InadmissibleParams`.

    The accepted set is exactly the one for which a positive finite-energy
    solution exists: subcritical with ``lambda < ((N-1)/2)^2``, critical for
    ``N >= 4`` with ``N(N-2)/4 < lambda < ((N-1)/2)^2``, and ``N = 2`` with
    ``lambda < 2(p+1)/(p+3)^2``.
    """
    if int(N) != N or N < 2:
        raise InadmissibleParams(f"dimension N={N} must be an integer >= 2")
    N = int(N)
    p = float(p)
    lam = float(lam)
    if not p > 1.0:
        raise InadmissibleParams(f"exponent p={p} must exceed 1")
    if epsilon < 0:
        raise InadmissibleParams(f"perturbation epsilon={epsilon} must be >= 0")
    bottom = ((N - 1) / 2.0) ** 2
    if N == 2:
        thr = two_d_threshold(p)
        if not lam < thr:
            raise InadmissibleParams(
                f"admissibility condition (N = 2): need lambda < 2(p+1)/(p+3)^2 = {thr:.6g}, got {lam}")
        return ProblemParams(N, p, lam, float(epsilon), Regime.TWO_D)
    pc = critical_exponent(N)
    if is_critical(N, p):
        if N == 3:
            raise InadmissibleParams(
                "admissibility condition: critical exponent p = 5 in dimension N = 3 admits no positive solution")
        lo = N * (N - 2) / 4.0
        if not lo < lam < bottom:
            raise InadmissibleParams(
                f"admissibility condition (critical exponent): need N(N-2)/4 = {lo:.6g} < lambda < ((N-1)/2)^2 = {bottom:.6g}, got {lam}")
        return ProblemParams(N, pc, lam, float(epsilon), Regime.CRITICAL)
    if p > pc:
        raise InadmissibleParams(
            f"admissibility condition: p = {p} exceeds the critical exponent (N+2)/(N-2) = {pc:.6g}")
    if not lam < bottom:
        raise InadmissibleParams(
            f"admissibility condition (subcritical): need lambda < ((N-1)/2)^2 = {bottom:.6g}, got {lam}")
    return ProblemParams(N, p, lam, float(epsilon), Regime.SUBCRITICAL)


@dataclass(frozen=True)
class OdeState:
    t: float
    u: float
    du: float

    def __post_init__(self):
        if not (math.isfinite(self.t) and math.isfinite(self.u) and math.isfinite(self.du)):
            raise DomainError(f"non-finite ODE state {self}")


def _profile_power(U, params: ProblemParams):
    """Return ``t -> U(t)^{p-1}`` with an exponential tail past the sampled range."""
    lo, hi = U.interp_range
    spline = U.spline(5)
    u_end = float(U.u[-1])
    g = params.gamma_plus
    q = params.p - 1.0

    def power(t):
        if t <= hi:
            val = float(spline(max(t, lo)))
        else:
            val = u_end * math.exp(-g * (t - hi))
        return abs(val) ** q

    return power


def effective_lambda(params: ProblemParams, t: float, U=None) -> float:
    """``lambda - epsilon U(t)^{p-1}``."""
    if params.epsilon == 0.0:
        return params.lam
    if U is None:
        raise ConfigurationError("epsilon > 0 requires the unperturbed profile U")
    return params.lam - params.epsilon * _profile_power(U, params)(t)


def rhs(params: ProblemParams, state: OdeState, U=None, coupling: float = 1.0):
    """Return ``(u', u'')`` at ``state``.

    ``coupling`` multiplies the nonlinearity; the perturbed Euler-Lagrange
    equation uses ``1 + epsilon`` while its normalized form uses 1.
    """
    t = state.t
    if t <= 0:
        raise DomainError("rhs is singular at t <= 0; launch with series_start")
    lam_eff = effective_lambda(params, t, U)
    u, du = state.u, state.du
    ddu = -(params.N - 1) / math.tanh(t) * du - lam_eff * u - coupling * abs(u) ** (params.p - 1) * u
    return du, ddu


def series_start(params: ProblemParams, a: float, t0: float, U=None, coupling: float = 1.0) -> OdeState:
    """Second-order Taylor launch from ``u(0) = a, u'(0) = 0``.

    At the origin ``coth(t) u'`` tends to ``u''(0)``, so the ODE reads
    ``N u''(0) + lambda_eps(0) a + a^p = 0``.
    """
    if not a > 0:
        raise DomainError("amplitude must be positive")
    if not 0 < t0 < 1:
        raise DomainError("launch time must lie in (0, 1)")
    lam0 = effective_lambda(params, 0.0, U) if params.epsilon else params.lam
    c = -(lam0 * a + coupling * a ** params.p) / params.N
    return OdeState(t0, a + 0.5 * c * t0 * t0, c * t0)


def launch_time(params: ProblemParams, a: float, t0: float, U=None, coupling: float = 1.0) -> float:
    """``t0`` shrunk so the quadratic launch stays accurate at large amplitude."""
    lam0 = effective_lambda(params, 0.0, U) if params.epsilon else params.lam
    c = abs(lam0 * a + coupling * a ** params.p) / params.N
    if c == 0.0:
        return t0
    return min(t0, 1e-2 * math.sqrt(a / c))


@dataclass(frozen=True)
class IntegrationControls:
    rtol: float = 1e-13
    atol: float = 1e-30
    stop_at_zero: bool = True
    blowup: float = BLOWUP_LEVEL


@dataclass
class Trajectory:
    t: np.ndarray
    u: np.ndarray
    du: np.ndarray
    status: str
    t_end: float
    t_cross: Optional[float] = None
    dense: Optional[Callable] = field(default=None, repr=False)
    nodes: Optional[np.ndarray] = None
    node_u: Optional[np.ndarray] = None
    node_du: Optional[np.ndarray] = None

    @property
    def crossed(self) -> bool:
        return self.status == "crossed"

    @property
    def blew_up(self) -> bool:
        return self.status == "blowup"


def integrate(params: Optional[ProblemParams], start: OdeState, t_end: float,
              controls: IntegrationControls = IntegrationControls(), *,
              nodes=None, U=None, coupling: float = 1.0,
              rhs_fn: Optional[Callable] = None) -> Trajectory:
    """Adaptive Dormand-Prince 8(5,3) integration from ``start`` to ``t_end``.

    Stops early at the first downward zero of ``u`` (when
    ``controls.stop_at_zero``) or when ``|u|`` exceeds ``controls.blowup``.
    ``rhs_fn(t, u, du) -> (du, ddu)`` replaces the radial equation; the test
    suite uses it for closed-form problems.  Dense output is evaluated at
    ``nodes`` that were reached.
    """
    if not t_end > start.t:
        raise DomainError("t_end must exceed the start time")
    if rhs_fn is None:
        if params is None:
            raise ConfigurationError("params required unless rhs_fn is given")
        if params.epsilon > 0 and U is None:
            raise ConfigurationError("epsilon > 0 requires the unperturbed profile U")
        N1 = params.N - 1
        lam = params.lam
        q = params.p - 1.0
        if params.epsilon > 0:
            upow = _profile_power(U, params)
            eps = params.epsilon

            def f(t, y):
                u, du = y
                return (du, -N1 / math.tanh(t) * du - (lam - eps * upow(t)) * u
                        - coupling * abs(u) ** q * u)
        else:
            def f(t, y):
                u, du = y
                return (du, -N1 / math.tanh(t) * du - lam * u - coupling * abs(u) ** q * u)
    else:
        def f(t, y):
            return rhs_fn(t, y[0], y[1])

    events = []

    def zero(t, y):
        return y[0]

    zero.terminal = True
    zero.direction = -1

    def overflow(t, y):
        return controls.blowup - abs(y[0])

    overflow.terminal = True
    events.append(overflow)
    if controls.stop_at_zero:
        events.append(zero)

    sol = solve_ivp(f, (start.t, t_end), [start.u, start.du], method="DOP853",
                    rtol=controls.rtol, atol=controls.atol, events=events,
                    dense_output=True)
    if sol.status == -1:
        raise StiffnessError(f"integration failed at t={sol.t[-1]!r}: {sol.message}")
    status = "completed"
    t_cross = None
    if sol.status == 1:
        if controls.stop_at_zero and sol.t_events[1].size:
            status = "crossed"
            t_cross = float(sol.t_events[1][0])
        if sol.t_events[0].size:
            status = "blowup"
    if not (np.all(np.isfinite(sol.y))):
        status = "blowup"
    traj = Trajectory(t=sol.t, u=sol.y[0], du=sol.y[1], status=status,
                      t_end=float(sol.t[-1]), t_cross=t_cross, dense=sol.sol)
    if nodes is not None:
        nodes = np.asarray(nodes, dtype=float)
        reached = nodes[(nodes >= start.t) & (nodes <= traj.t_end)]
        vals = sol.sol(reached) if reached.size else np.empty((2, 0))
        traj.nodes, traj.node_u, traj.node_du = reached, vals[0], vals[1]
    return traj


class TrajectoryTag(str, enum.Enum):
    CROSSES_ZERO = "CrossesZero"
    SLOW_DECAY = "SlowDecay"
    FAST_DECAY_CANDIDATE = "FastDecayCandidate"
    BLOWUP = "Blowup"


@dataclass(frozen=True)
class TrajectoryClass:
    tag: TrajectoryTag
    t_cross: Optional[float] = None
    tail_rate: Optional[float] = None


def default_horizon(params: ProblemParams) -> float:
    return max(15.0, 40.0 / params.gamma_plus)


def tail_tolerance(params: ProblemParams) -> float:
    return max(0.05 * (params.gamma_plus - params.gamma_minus), 1e-3)


def tail_rate(traj: Trajectory, fraction: float = 0.2, samples: int = 101) -> float:
    """Median of ``u'/u`` over the last ``fraction`` of the integrated range."""
    t1 = traj.t_end
    t0 = traj.t[0] + (1.0 - fraction) * (t1 - traj.t[0])
    ts = np.linspace(t0, t1, samples)
    u, du = traj.dense(ts)
    return float(np.median(du / u))


def classify(params: ProblemParams, traj: Trajectory) -> TrajectoryClass:
    if traj.blew_up:
        return TrajectoryClass(TrajectoryTag.BLOWUP)
    if traj.crossed:
        return TrajectoryClass(TrajectoryTag.CROSSES_ZERO, t_cross=traj.t_cross)
    if np.any(traj.u <= 0):
        # an unchecked sign change (stop_at_zero disabled); locate it on the dense output
        k = int(np.argmax(traj.u <= 0))
        a, b = traj.t[k - 1], traj.t[k]
        for _ in range(200):
            m = 0.5 * (a + b)
            if traj.dense(m)[0] > 0:
                a = m
            else:
                b = m
            if b - a < 1e-13:
                break
        return TrajectoryClass(TrajectoryTag.CROSSES_ZERO, t_cross=0.5 * (a + b))
    rate = tail_rate(traj)
    tol = tail_tolerance(params)
    if abs(rate + params.gamma_minus) < tol:
        return TrajectoryClass(TrajectoryTag.SLOW_DECAY, tail_rate=rate)
    if abs(rate + params.gamma_plus) < tol:
        return TrajectoryClass(TrajectoryTag.FAST_DECAY_CANDIDATE, tail_rate=rate)
    raise IndeterminateError(
        f"tail rate {rate:.6g} matches neither -gamma_minus={-params.gamma_minus:.6g} "
        f"nor -gamma_plus={-params.gamma_plus:.6g}; extend the horizon")
