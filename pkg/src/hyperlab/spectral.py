"""Mode-by-mode spectrum of the linearized operator around a radial profile.

On spherical-harmonic mode ``ell`` the operator
``-phi'' - (N-1) coth(t) phi' + [ell(ell+N-2)/sinh^2 t + V(t)] phi`` is
conjugated by ``w = sinh^{(N-1)/2}(t) phi`` into the Schrodinger form
``-w'' + Q(t) w`` with

    Q = m^2 + (ell + m)(ell + m - 1) / sinh^2 t + V(t),   m = (N-1)/2,

and discretized by central differences on a uniform grid with Dirichlet
ends.  The result is a symmetric tridiagonal matrix whose eigenvalues are
located by Sturm-sequence bisection.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConfigurationError, DegeneracyError, ResolutionError, SizeError
from .groundstate import ProfileKind, RadialProfile, origin_scale

MAX_STEP = 0.05
DEFAULT_C_DELTA = 10.0


def angular_eigenvalue(ell: int, N: int) -> float:
    """Eigenvalue ``ell(ell+N-2)`` of ``-Delta`` on the unit sphere ``S^{N-1}``."""
    return float(ell * (ell + N - 2))


def multiplicity(ell: int, N: int) -> int:
    """Dimension of the degree-``ell`` spherical harmonics on ``S^{N-1}``."""
    if ell < 0:
        raise ValueError("ell must be non-negative")
    if N == 2:
        return 1 if ell == 0 else 2
    if ell == 0:
        return 1
    return (2 * ell + N - 2) * math.comb(ell + N - 3, ell - 1) // ell


class Variant(str, enum.Enum):
    LINEARIZED = "Linearized"
    PERTURBED = "PerturbedSecondVariation"


class DomainKind(str, enum.Enum):
    FULL_SPACE = "TruncatedFullSpace"
    BALL = "Ball"


@dataclass(frozen=True)
class Domain:
    kind: DomainKind
    T: float


@dataclass(frozen=True, eq=False)
class ModeOperator:
    ell: int
    params: object
    grid: np.ndarray
    h: float
    diag: np.ndarray
    offdiag: np.ndarray
    weight: np.ndarray
    domain: Domain
    variant: Variant
    epsilon: float = 0.0
    potential: np.ndarray = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.diag.size

    @property
    def _conj(self) -> np.ndarray:
        return np.sqrt(self.weight)

    def matvec(self, w: np.ndarray) -> np.ndarray:
        """Symmetric matrix times ``w`` (Schrodinger variable)."""
        out = self.diag * w
        out[:-1] += self.offdiag * w[1:]
        out[1:] += self.offdiag * w[:-1]
        return out

    def to_w(self, phi):
        return self._conj * np.asarray(phi, float)

    def from_w(self, w):
        return np.asarray(w, float) / self._conj

    def apply(self, phi: np.ndarray, boundary=None) -> np.ndarray:
        """The mode operator acting on radial samples ``phi``.

        By default ``phi`` is taken to vanish at both endpoints (the Dirichlet
        operator).  ``boundary=(phi(0), phi(T))`` supplies the endpoint samples
        instead, which gives the plain finite-difference stencil of the
        differential operator.
        """
        out = self.matvec(self.to_w(phi))
        if boundary is not None:
            lo, hi = boundary
            m = (self.params.N - 1) / 2.0
            w_lo = float(lo) if m == 0 else 0.0
            w_hi = math.sinh(self.domain.T) ** m * float(hi)
            out[0] -= w_lo / self.h ** 2
            out[-1] -= w_hi / self.h ** 2
        return self.from_w(out)

    def weighted_inner(self, phi, psi) -> float:
        return float(np.sum(np.asarray(phi) * np.asarray(psi) * self.weight) * self.h)

    def weighted_norm(self, phi) -> float:
        return math.sqrt(self.weighted_inner(phi, phi))


def _domain_for(profile: RadialProfile, domain: Optional[Domain], T: Optional[float]) -> Domain:
    if domain is None:
        if profile.kind == ProfileKind.BALL:
            domain = Domain(DomainKind.BALL, profile.radius)
        else:
            domain = Domain(DomainKind.FULL_SPACE, T if T is not None else profile.T)
    if domain.kind == DomainKind.BALL:
        if profile.kind != ProfileKind.BALL or abs(profile.radius - domain.T) > 1e-12:
            raise ConfigurationError("Ball domain requires the ball profile of the same radius")
    else:
        if profile.kind != ProfileKind.FULL_SPACE:
            raise ConfigurationError("truncated full-space domain requires a full-space profile")
        if domain.T > profile.T * (1 + 1e-12):
            raise ConfigurationError(f"T_max={domain.T} exceeds the profile range {profile.T}")
    return domain


def assemble(profile: RadialProfile, ell: int, variant: Variant = Variant.LINEARIZED,
             domain: Optional[Domain] = None, *, h: Optional[float] = None,
             T: Optional[float] = None, epsilon: Optional[float] = None,
             angular: Optional[float] = None) -> ModeOperator:
    """Finite-difference mode operator around ``profile``.

    ``angular`` overrides the sphere eigenvalue ``ell(ell+N-2)``; it exists
    so verification can seed a wrong value and watch the checks fail.
    """
    params = profile.params
    N = params.N
    h = profile.h if h is None else float(h)
    if h > MAX_STEP:
        raise ResolutionError(f"grid step h={h} exceeds {MAX_STEP}")
    scale = origin_scale(params, profile.amplitude)
    if h > scale / 4.0:
        raise ResolutionError(
            f"grid step h={h} does not resolve the profile core (scale {scale:.3g}); use h <= {scale / 4:.3g}")
    domain = _domain_for(profile, domain, T)
    n = int(round(domain.T / h))
    if abs(n * h - domain.T) > 1e-9 * domain.T or n < 3:
        raise ConfigurationError(f"T={domain.T} is not a multiple of h={h}")
    t = h * np.arange(1, n)
    u = profile.evaluate(t)[0]
    upow = np.abs(u) ** (params.p - 1)
    m = (N - 1) / 2.0
    ang = angular_eigenvalue(ell, N) if angular is None else float(angular)
    # m(m-1) + ell(ell+N-2) = (ell+m)(ell+m-1) for the true angular value
    centrifugal = (m * (m - 1) + ang) / np.sinh(t) ** 2
    eps = params.epsilon if epsilon is None else float(epsilon)
    if variant == Variant.LINEARIZED:
        V = -params.lam - params.p * upow
    else:
        V = -params.lam + eps * upow - (1 + eps) * params.p * upow
    Q = m * m + centrifugal + V
    diag = 2.0 / h ** 2 + Q
    off = np.full(n - 2, -1.0 / h ** 2)
    weight = np.sinh(t) ** (N - 1)
    return ModeOperator(ell=ell, params=params, grid=t, h=h, diag=diag, offdiag=off,
                        weight=weight, domain=domain, variant=variant,
                        epsilon=eps if variant == Variant.PERTURBED else 0.0, potential=Q)


def sturm_count(diag, offdiag, x: float) -> int:
    """Number of eigenvalues strictly below ``x``.

    Counts negative pivots of the LDL^T factorization of ``T - x I``.
    """
    d = diag.tolist() if isinstance(diag, np.ndarray) else list(diag)
    e2 = (np.asarray(offdiag, float) ** 2).tolist()
    tiny = 1e-300
    count = 0
    q = d[0] - x
    if q < 0:
        count += 1
    for i in range(1, len(d)):
        if q == 0.0:
            q = tiny
        q = d[i] - x - e2[i - 1] / q
        if q < 0:
            count += 1
    return count


def gershgorin(diag, offdiag):
    diag = np.asarray(diag, float)
    r = np.zeros_like(diag)
    a = np.abs(np.asarray(offdiag, float))
    r[:-1] += a
    r[1:] += a
    return float(np.min(diag - r)), float(np.max(diag + r))


def bisect_eigenvalue(diag, offdiag, j: int, tol: float = 1e-12, bounds=None) -> float:
    """``j``-th smallest eigenvalue (0-based) of a symmetric tridiagonal matrix."""
    lo, hi = bounds if bounds is not None else gershgorin(diag, offdiag)
    lo -= 1e-12 * max(1.0, abs(lo))
    hi += 1e-12 * max(1.0, abs(hi))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if sturm_count(diag, offdiag, mid) > j:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def tridiagonal_eigenvalues(diag, offdiag, indices, tol: float = 1e-12):
    diag = np.asarray(diag, float)
    n = diag.size
    idx = list(indices)
    if any(j < 0 or j >= n for j in idx):
        raise SizeError(f"eigenvalue index out of range for a {n}x{n} matrix")
    lo, hi = gershgorin(diag, offdiag)
    out = []
    for j in sorted(idx):
        # eigenvalues are simple (non-zero off-diagonal), so the previous one bounds from below
        start = out[-1] if out else lo
        out.append(bisect_eigenvalue(diag, offdiag, j, tol, (start, hi)))
    return [out[sorted(idx).index(j)] for j in idx]


def zero_window(h: float, C_delta: float = DEFAULT_C_DELTA) -> float:
    """Half-width ``max(C_delta h^2, 1e-8)`` of the band treated as numerically zero."""
    return max(C_delta * h * h, 1e-8)


@dataclass(frozen=True)
class SpectrumReport:
    mode: int
    eigenvalues: tuple
    negative: int
    near_zero: int
    positive: int
    delta: float
    multiplicity: int
    size: int
    eigenvectors: Optional[tuple] = field(default=None, repr=False)

    @property
    def morse_contribution(self) -> int:
        return self.negative * self.multiplicity

    @property
    def counts(self):
        return self.negative, self.near_zero, self.positive

    def as_dict(self) -> dict:
        return {"mode": self.mode, "eigenvalues": list(self.eigenvalues),
                "counts": {"negative": self.negative, "near_zero": self.near_zero,
                           "positive": self.positive},
                "delta": self.delta, "multiplicity": self.multiplicity,
                "morse_contribution": self.morse_contribution, "size": self.size}


def eigenvalues_lowest(op: ModeOperator, k: int, window: Optional[float] = None, *,
                       C_delta: float = DEFAULT_C_DELTA, tol: float = 1e-12,
                       with_vectors: bool = False) -> SpectrumReport:
    if k < 1:
        raise SizeError("k must be at least 1")
    if k > op.size:
        raise SizeError(f"requested {k} eigenvalues of a {op.size}x{op.size} matrix")
    delta = zero_window(op.h, C_delta) if window is None else float(window)
    vals = tridiagonal_eigenvalues(op.diag, op.offdiag, range(k), tol)
    neg = sturm_count(op.diag, op.offdiag, -delta)
    below = sturm_count(op.diag, op.offdiag, delta)
    vecs = None
    if with_vectors:
        vecs = tuple(eigenvector(op, mu)[1] for mu in vals)
    return SpectrumReport(mode=op.ell, eigenvalues=tuple(vals), negative=neg,
                          near_zero=below - neg, positive=op.size - below, delta=delta,
                          multiplicity=multiplicity(op.ell, op.params.N), size=op.size,
                          eigenvectors=vecs)


def tridiagonal_eigenvector(diag, offdiag, mu: float, *, max_iter: int = 50, tol: float = 1e-8):
    """Inverse iteration for the eigenvector of an isolated eigenvalue near ``mu``.

    Returns ``(v, residual)`` with ``v`` of unit Euclidean norm.
    """
    diag = np.asarray(diag, float)
    off = np.asarray(offdiag, float)
    n = diag.size
    scale = max(1.0, float(np.max(np.abs(diag))), abs(mu))
    gap = 1e-10 * max(1.0, abs(mu))
    if sturm_count(diag, off, mu + gap) - sturm_count(diag, off, mu - gap) > 1:
        raise DegeneracyError(f"eigenvalue near {mu!r} is not simple")
    shift = mu + 1e-15 * scale
    ab = np.zeros((3, n))
    ab[0, 1:] = off
    ab[1] = diag - shift
    ab[2, :-1] = off
    rng = np.random.default_rng(12345)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    res = math.inf
    for _ in range(max_iter):
        try:
            w = solve_banded((1, 1), ab, v)
        except np.linalg.LinAlgError:
            ab[1] -= 1e-13 * scale
            continue
        nrm = np.linalg.norm(w)
        if not np.isfinite(nrm) or nrm == 0:
            raise DegeneracyError("inverse iteration broke down")
        v = w / nrm
        Av = diag * v
        Av[:-1] += off * v[1:]
        Av[1:] += off * v[:-1]
        rq = float(v @ Av)
        res = float(np.max(np.abs(Av - rq * v)))
        if res < tol:
            return v, res
    raise DegeneracyError(f"inverse iteration did not converge (residual {res:.3g})")


def eigenvector(op: ModeOperator, eigenvalue: float, *, max_iter: int = 50, tol: float = 1e-8):
    """Eigenvector as radial samples ``phi`` with unit weighted norm.

    Returns ``(t, phi, residual)``; the sign is fixed so that the sample of
    largest magnitude is positive.
    """
    w, res = tridiagonal_eigenvector(op.diag, op.offdiag, eigenvalue, max_iter=max_iter, tol=tol)
    phi = op.from_w(w)
    phi /= op.weighted_norm(phi)
    if phi[np.argmax(np.abs(phi))] < 0:
        phi = -phi
    return op.grid, phi, res


@dataclass(frozen=True)
class MorseReport:
    variant: Variant
    total: int
    radial: int
    modes: tuple
    unresolved: tuple

    def as_dict(self) -> dict:
        return {"variant": self.variant.value, "morse_index": self.total,
                "radial_morse_index": self.radial,
                "modes": [m.as_dict() for m in self.modes],
                "unresolved_modes": list(self.unresolved)}


def _kernel_mode_allowed(profile: RadialProfile, variant: Variant, ell: int) -> bool:
    return ell == 1 and profile.kind == ProfileKind.FULL_SPACE and variant == Variant.LINEARIZED


def morse_index(profile: RadialProfile, variant: Variant = Variant.LINEARIZED, ell_max: int = 4, *,
                h: Optional[float] = None, T: Optional[float] = None, epsilon: Optional[float] = None,
                C_delta: float = DEFAULT_C_DELTA, k: int = 3) -> MorseReport:
    """Negative eigenvalues summed over modes ``0..ell_max`` with multiplicity.

    Near-zero eigenvalues are never counted; on any mode other than the
    translation mode ``ell = 1`` of the whole-space linearization they are
    reported as unresolved.
    """
    if ell_max < 2:
        raise ConfigurationError("ell_max must be at least 2")
    modes = []
    unresolved = []
    for ell in range(ell_max + 1):
        op = assemble(profile, ell, variant, h=h, T=T, epsilon=epsilon)
        rep = eigenvalues_lowest(op, min(k, op.size), C_delta=C_delta)
        modes.append(rep)
        if rep.near_zero and not _kernel_mode_allowed(profile, variant, ell):
            unresolved.append(ell)
    total = sum(m.morse_contribution for m in modes)
    return MorseReport(variant=variant, total=total, radial=modes[0].negative,
                       modes=tuple(modes), unresolved=tuple(unresolved))


@dataclass(frozen=True)
class GapRow:
    ell: int
    min_abs_eigenvalue: float
    nearest_eigenvalue: float
    negative_count: int
    near_zero_count: int
    multiplicity: int
    delta: float


def smallest_magnitude(op: ModeOperator, tol: float = 1e-12) -> float:
    """Eigenvalue of ``op`` closest to zero (signed)."""
    j = sturm_count(op.diag, op.offdiag, 0.0)
    idx = [i for i in (j - 1, j) if 0 <= i < op.size]
    vals = tridiagonal_eigenvalues(op.diag, op.offdiag, idx, tol)
    return min(vals, key=abs)


def kernel_gap_report(profile: RadialProfile, ell_max: int = 4, *, h: Optional[float] = None,
                      T: Optional[float] = None, C_delta: float = DEFAULT_C_DELTA,
                      variant: Variant = Variant.LINEARIZED) -> list:
    rows = []
    for ell in range(ell_max + 1):
        op = assemble(profile, ell, variant, h=h, T=T)
        mu = smallest_magnitude(op)
        delta = zero_window(op.h, C_delta)
        neg = sturm_count(op.diag, op.offdiag, -delta)
        nz = sturm_count(op.diag, op.offdiag, delta) - neg
        rows.append(GapRow(ell=ell, min_abs_eigenvalue=abs(mu), nearest_eigenvalue=mu,
                           negative_count=neg, near_zero_count=nz,
                           multiplicity=multiplicity(ell, profile.params.N), delta=delta))
    return rows


def kernel_dimension(rows) -> int:
    """Near-zero eigenvalues weighted by their angular multiplicity."""
    return sum(r.near_zero_count * r.multiplicity for r in rows)
