from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import eigh_tridiagonal

from hyperlab.errors import ConfigurationError, DegeneracyError, ResolutionError, SizeError
from hyperlab.groundstate import profile_from_samples
from hyperlab.spectral import (Domain, DomainKind, Variant, angular_eigenvalue, assemble,
                               eigenvalues_lowest, eigenvector, kernel_dimension, kernel_gap_report,
                               morse_index, multiplicity, smallest_magnitude, sturm_count,
                               tridiagonal_eigenvalues, tridiagonal_eigenvector, zero_window)


def test_angular_and_multiplicity():
    assert angular_eigenvalue(0, 3) == 0.0
    assert angular_eigenvalue(2, 3) == 6.0
    assert [multiplicity(l, 3) for l in range(5)] == [1, 3, 5, 7, 9]
    assert [multiplicity(l, 4) for l in range(4)] == [1, 4, 9, 16]
    assert [multiplicity(l, 2) for l in range(3)] == [1, 2, 2]
    for N in (3, 4, 5, 6):
        assert multiplicity(1, N) == N
        for l in range(1, 6):
            expected = (2 * l + N - 2) / (l + N - 2) * math.comb(l + N - 2, l)
            assert multiplicity(l, N) == round(expected)


def test_two_by_two():
    vals = tridiagonal_eigenvalues(np.array([2.0, 2.0]), np.array([-1.0]), [0, 1])
    assert np.allclose(vals, [1.0, 3.0], atol=1e-12)
    assert sturm_count(np.array([2.0, 2.0]), np.array([-1.0]), 2.0) == 1


def test_discrete_laplacian():
    n = 99
    h = 1.0 / (n + 1)
    diag = np.full(n, 2 / h ** 2)
    off = np.full(n - 1, -1 / h ** 2)
    exact = 4 / h ** 2 * np.sin(np.arange(1, 6) * math.pi * h / 2) ** 2
    vals = tridiagonal_eigenvalues(diag, off, range(5))
    assert np.max(np.abs(np.array(vals) - exact)) < 1e-9
    x = h * np.arange(1, n + 1)
    v, res = tridiagonal_eigenvector(diag, off, vals[1])
    mode = np.sin(2 * math.pi * x)
    mode /= np.linalg.norm(mode)
    assert abs(abs(v @ mode) - 1) < 1e-10


def test_random_sturm_counts_match_lapack():
    rng = np.random.default_rng(7)
    for _ in range(5):
        d = rng.standard_normal(50)
        e = rng.standard_normal(49)
        ref = eigh_tridiagonal(d, e, eigvals_only=True)
        for x in rng.uniform(-4, 4, 20):
            assert sturm_count(d, e, x) == int(np.sum(ref < x))
        vals = tridiagonal_eigenvalues(d, e, range(50))
        assert np.max(np.abs(np.array(vals) - ref)) < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=8, max_size=8),
       st.lists(st.floats(0.1, 5), min_size=7, max_size=7))
def test_sturm_count_property(d, e):
    d, e = np.array(d), -np.array(e)
    ref = eigh_tridiagonal(d, e, eigvals_only=True)
    vals = tridiagonal_eigenvalues(d, e, range(8))
    assert np.max(np.abs(np.array(vals) - ref)) < 1e-9 * max(1.0, np.max(np.abs(ref)))


def test_double_eigenvalue_raises():
    # two decoupled identical blocks give every eigenvalue twice
    d = np.array([2.0, 2.0, 2.0, 2.0])
    e = np.array([-1.0, 0.0, -1.0])
    with pytest.raises(DegeneracyError):
        tridiagonal_eigenvector(d, e, 1.0)


def test_size_error():
    with pytest.raises(SizeError):
        tridiagonal_eigenvalues(np.ones(3), np.zeros(2), [3])


def test_operator_structure(ref_profile):
    op = assemble(ref_profile, 1)
    assert np.all(op.offdiag < 0)
    rng = np.random.default_rng(0)
    x, y = rng.standard_normal((2, op.size))
    assert abs(x @ op.matvec(y) - y @ op.matvec(x)) < 1e-11 * np.linalg.norm(x) * np.linalg.norm(y) * np.max(np.abs(op.diag))
    t = op.grid
    m = 1.0
    u = ref_profile.evaluate(t)[0]
    expected = m * m + 2.0 / np.sinh(t) ** 2 - 0.5 - 3 * u ** 2
    assert np.allclose(op.potential, expected, rtol=1e-12, atol=1e-12)
    pert = assemble(ref_profile, 1, Variant.PERTURBED, epsilon=1e-2)
    expected_p = m * m + 2.0 / np.sinh(t) ** 2 - 0.5 + 1e-2 * u ** 2 - 1.01 * 3 * u ** 2
    assert np.allclose(pert.potential, expected_p, rtol=1e-12, atol=1e-12)


def test_assemble_errors(ref_profile, ball_profile):
    with pytest.raises(ResolutionError):
        assemble(ref_profile, 0, h=0.1)
    with pytest.raises(ConfigurationError):
        assemble(ref_profile, 0, T=20.0)
    with pytest.raises(ConfigurationError):
        assemble(ref_profile, 0, T=10.005)
    with pytest.raises(ConfigurationError):
        assemble(ref_profile, 0, domain=Domain(DomainKind.BALL, 3.0))
    with pytest.raises(ConfigurationError):
        assemble(ball_profile, 0, domain=Domain(DomainKind.FULL_SPACE, 3.0))


def test_resolution_guard_for_concentrated_core(critical_profile):
    # the critical ground state at lambda = 2.1 is concentrated near the origin
    assert critical_profile.amplitude ** -1.0 / 4 < 0.01
    with pytest.raises(ResolutionError, match="core"):
        assemble(critical_profile, 0)


def test_free_operator_bounded_below(ref_params):
    t = 0.01 * np.arange(1, 1501)
    zero = profile_from_samples(ref_params, t, np.zeros_like(t), np.zeros_like(t), amplitude=0.0, h=0.01)
    bottom = ((ref_params.N - 1) / 2) ** 2 - ref_params.lam
    for ell in range(3):
        mu = eigenvalues_lowest(assemble(zero, ell), 1).eigenvalues[0]
        assert mu >= bottom
        assert mu - bottom < 30.0 / 15.0 ** 2


def test_lowest_eigenvalue_increases_with_ell(ref_profile):
    lows = [eigenvalues_lowest(assemble(ref_profile, l), 1).eigenvalues[0] for l in range(5)]
    assert np.all(np.diff(lows) > 0)


def test_reference_spectrum(ref_profile):
    op = assemble(ref_profile, 0)
    rep = eigenvalues_lowest(op, 3)
    lapack = eigh_tridiagonal(op.diag, op.offdiag, eigvals_only=True, select="i", select_range=(0, 2))
    assert np.max(np.abs(np.array(rep.eigenvalues) - lapack)) < 1e-9
    assert rep.counts == (1, 0, op.size - 1)
    assert rep.delta == zero_window(0.01) == pytest.approx(1e-3)
    one = eigenvalues_lowest(assemble(ref_profile, 1), 2)
    assert one.near_zero == 1 and one.negative == 0
    with pytest.raises(SizeError):
        eigenvalues_lowest(op, op.size + 1)


def test_ground_state_eigenvector(ref_profile):
    op = assemble(ref_profile, 0)
    mu = eigenvalues_lowest(op, 1).eigenvalues[0]
    t, phi, res = eigenvector(op, mu)
    assert res < 1e-8
    assert op.weighted_norm(phi) == pytest.approx(1.0, rel=1e-12)
    assert np.all(phi > -1e-12)
    image = op.apply(phi)
    assert op.weighted_norm(image - mu * phi) < 1e-6 * abs(mu)


def test_morse_index_linearized(ref_profile):
    rep = morse_index(ref_profile)
    assert rep.total == 1 and rep.radial == 1 and rep.unresolved == ()
    with pytest.raises(ConfigurationError):
        morse_index(ref_profile, ell_max=1)


def test_morse_index_perturbed_radial(ref_profile):
    rep = morse_index(ref_profile, Variant.PERTURBED, epsilon=1e-3)
    assert rep.radial == 1
    # the translation directions become negative at order eps
    assert rep.modes[1].negative == 1
    assert rep.total == 1 + ref_profile.params.N


def test_kernel_gap_report(ref_profile):
    rows = kernel_gap_report(ref_profile)
    assert kernel_dimension(rows) == 3
    assert rows[1].min_abs_eigenvalue < rows[1].delta
    assert all(r.min_abs_eigenvalue > r.delta for r in rows if r.ell != 1)
    assert smallest_magnitude(assemble(ref_profile, 1)) == pytest.approx(rows[1].nearest_eigenvalue)


def test_ball_has_no_kernel(ball_profile):
    rows = kernel_gap_report(ball_profile)
    assert kernel_dimension(rows) == 0
    rep = morse_index(ball_profile)
    assert rep.radial == 1 and rep.total == 1 and rep.unresolved == ()
