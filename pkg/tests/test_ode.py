from __future__ import annotations

import math

import numpy as np
import pytest

from hyperlab.errors import ConfigurationError, DomainError, InadmissibleParams, IndeterminateError
from hyperlab.groundstate import ShootingOptions, _shoot
from hyperlab.ode import (IntegrationControls, OdeState, ProblemParams, Regime, TrajectoryTag,
                          classify, default_horizon, integrate, rhs, series_start, tail_tolerance,
                          validate_params)


def test_validate_critical_accepted():
    p = validate_params(4, 3, 2.1)
    assert p.regime == Regime.CRITICAL
    assert p.p == 3.0


def test_validate_rejections_name_the_condition():
    with pytest.raises(InadmissibleParams, match="critical exponent p = 5 in dimension N = 3"):
        validate_params(3, 5, 0.5)
    with pytest.raises(InadmissibleParams, match=r"N = 2.*0\.222"):
        validate_params(2, 3, 0.3)
    with pytest.raises(InadmissibleParams, match="critical exponent"):
        validate_params(4, 3, 1.9)
    with pytest.raises(InadmissibleParams, match="subcritical"):
        validate_params(3, 3, 1.0)
    with pytest.raises(InadmissibleParams):
        validate_params(3, 7, 0.5)
    with pytest.raises(InadmissibleParams):
        validate_params(3, 1.0, 0.5)
    with pytest.raises(InadmissibleParams):
        validate_params(3, 3, 0.5, epsilon=-1e-3)


def test_validate_regimes():
    assert validate_params(3, 3, 0.5).regime == Regime.SUBCRITICAL
    assert validate_params(2, 3, 0.1).regime == Regime.TWO_D


def test_decay_exponents():
    p = validate_params(3, 3, 0.75)
    assert p.gamma_plus == pytest.approx(1.5, abs=1e-15)
    assert p.gamma_minus == pytest.approx(0.5, abs=1e-15)
    assert validate_params(3, 3, 0.0).gamma_minus == 0.0


def test_rhs_values():
    p = validate_params(3, 3, 0.5)
    assert rhs(p, OdeState(1.0, 0.0, 0.0)) == (0.0, 0.0)
    t = math.atanh(0.5)  # coth t = 2
    du, ddu = rhs(p, OdeState(t, 1.0, 0.0))
    assert ddu == pytest.approx(-1.5, abs=1e-14)
    with pytest.raises(DomainError):
        rhs(p, OdeState(0.0, 1.0, 0.0))


def test_rhs_perturbed_matches_shifted_lambda(ref_profile):
    p = ref_profile.params
    eps = 1e-2
    t = 1.3
    u = float(ref_profile.evaluate(t)[0])
    state = OdeState(t, u, -0.2)
    _, ddu_eps = rhs(p.with_epsilon(eps), state, U=ref_profile)
    shifted = ProblemParams(p.N, p.p, p.lam - eps * u ** (p.p - 1), 0.0, p.regime)
    _, ddu0 = rhs(shifted, state)
    assert ddu_eps == pytest.approx(ddu0, rel=1e-9)
    with pytest.raises(ConfigurationError):
        rhs(p.with_epsilon(eps), state)


def test_series_start_curvature_identity():
    p = validate_params(3, 3, 0.5)
    a, t0 = 1.7, 1e-4
    s = series_start(p, a, t0)
    c = s.du / t0
    assert p.N * c + p.lam * a + a ** p.p == pytest.approx(0.0, abs=1e-12)


def test_series_start_flat_for_negative_lambda():
    p = validate_params(3, 3, -4.0)
    s = series_start(p, 2.0, 1e-3)
    assert s.u == 2.0 and s.du == 0.0


def test_series_start_halving_consistency():
    p = validate_params(3, 3, 0.5)
    a = 2.0
    ctl = IntegrationControls(stop_at_zero=False)
    t_common = [0.5]
    r1 = integrate(p, series_start(p, a, 1e-4), 1.0, ctl, nodes=t_common)
    r2 = integrate(p, series_start(p, a, 5e-5), 1.0, ctl, nodes=t_common)
    assert abs(r1.node_u[0] - r2.node_u[0]) < 1e-9


def test_integrate_cosine_oracle():
    traj = integrate(None, OdeState(0.01, math.cos(0.01), -math.sin(0.01)), 10.0,
                     IntegrationControls(stop_at_zero=False),
                     nodes=np.linspace(0.01, 10.0, 500), rhs_fn=lambda t, u, du: (du, -u))
    assert np.max(np.abs(traj.node_u - np.cos(traj.nodes))) < 1e-9


def test_integrate_zero_data_stays_zero():
    p = validate_params(3, 3, 0.5)
    traj = integrate(p, OdeState(0.1, 0.0, 0.0), 5.0, IntegrationControls(stop_at_zero=False))
    assert np.all(traj.u == 0.0)


def test_integrate_self_convergence():
    p = validate_params(3, 3, 0.5)
    nodes = np.linspace(0.1, 15.0, 300)
    start = series_start(p, 0.5, 1e-4)
    a = integrate(p, start, 15.0, IntegrationControls(rtol=1e-10, stop_at_zero=False), nodes=nodes)
    b = integrate(p, start, 15.0, IntegrationControls(rtol=1e-8, stop_at_zero=False), nodes=nodes)
    assert np.max(np.abs(a.node_u - b.node_u)) < 1e-7


def test_integrate_tolerance_halving():
    p = validate_params(3, 3, 0.5)
    start = series_start(p, 0.5, 1e-4)
    for tol in (1e-8, 1e-10):
        a = integrate(p, start, 5.0, IntegrationControls(rtol=tol, stop_at_zero=False))
        b = integrate(p, start, 5.0, IntegrationControls(rtol=tol / 2, stop_at_zero=False))
        assert abs(a.u[-1] - b.u[-1]) < 10 * tol


def test_integrate_bad_interval():
    p = validate_params(3, 3, 0.5)
    with pytest.raises(DomainError):
        integrate(p, OdeState(1.0, 1.0, 0.0), 0.5)


def test_integrate_blowup_flag():
    traj = integrate(None, OdeState(0.0, 1.0, 0.0), 100.0, IntegrationControls(stop_at_zero=False),
                     rhs_fn=lambda t, u, du: (du, u))
    assert traj.blew_up


def test_classification_dichotomy(ref_profile):
    p = ref_profile.params
    a_star = ref_profile.amplitude
    opts = ShootingOptions()
    H = default_horizon(p)
    for factor in (2.0, 10.0, 100.0):
        assert classify(p, _shoot(p, factor * a_star, H, opts, None, 1.0)).tag == TrajectoryTag.CROSSES_ZERO
    for factor in (0.5, 0.1, 0.01):
        cls = classify(p, _shoot(p, factor * a_star, H, opts, None, 1.0))
        assert cls.tag == TrajectoryTag.SLOW_DECAY
        assert abs(cls.tail_rate + p.gamma_minus) < tail_tolerance(p)
    assert classify(p, _shoot(p, a_star * (1 + 1e-6), H, opts, None, 1.0)).tag == TrajectoryTag.CROSSES_ZERO
    assert classify(p, _shoot(p, a_star * (1 - 1e-6), H, opts, None, 1.0)).tag == TrajectoryTag.SLOW_DECAY


def test_classify_crossing_without_event():
    p = validate_params(3, 3, 0.5)
    traj = integrate(p, series_start(p, 5.0, 1e-4), 15.0, IntegrationControls(stop_at_zero=False))
    cls = classify(p, traj)
    assert cls.tag == TrajectoryTag.CROSSES_ZERO and cls.t_cross > 0


def test_classify_indeterminate_tail():
    # u = e^{-t} decays at rate 1, between -gamma_plus and -gamma_minus
    p = validate_params(3, 3, 0.5)
    traj = integrate(None, OdeState(0.1, 1.0, -1.0), 15.0, IntegrationControls(stop_at_zero=False),
                     rhs_fn=lambda t, u, du: (du, u))
    with pytest.raises(IndeterminateError, match="extend the horizon"):
        classify(p, traj)
