import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from p2pswarm import _rk
from p2pswarm.fluid import (
    IntegrationError,
    closed_form_case1,
    closed_form_logistic,
    drift_oracle,
    field_component,
    integrate,
    jacobian,
    phi_psi,
    sir_final_size,
    sir_integral,
    vector_field,
)
from p2pswarm.model import ModelParams, build_jump_set

pos = st.floats(0.0, 3.0)


def test_phi_psi_examples():
    p = ModelParams.build(2, {}, 1.0, 1.0)
    x = np.array([0.3, 0.5, 0.7, 1.1])
    pp = phi_psi(p, x, 0)
    assert pp.phi_d == pytest.approx(0.5 + 0.7 + 1.1)
    assert pp.phi_s == 0 and pp.psi_d == 0
    full = phi_psi(p, x, 3)
    assert full.phi_d == 0 and full.phi_s == 0
    one = phi_psi(p, x, 1)
    assert one.phi_s == 0.7 and one.psi_d == 0.3


@settings(max_examples=50)
@given(st.lists(pos, min_size=2, max_size=2), st.lists(pos, min_size=2, max_size=2),
       st.floats(0.1, 3), pos)
def test_single_chunk_field(x, alpha, beta, delta):
    p = ModelParams(1, tuple(alpha), beta, 0.0, delta)
    a, y = x
    expect = [alpha[0] - beta * a * y, alpha[1] + beta * a * y - delta * y]
    np.testing.assert_allclose(vector_field(p, x), expect, rtol=1e-14, atol=1e-14)


@settings(max_examples=50)
@given(st.lists(pos, min_size=4, max_size=4), st.lists(pos, min_size=4, max_size=4),
       st.floats(0.1, 3), pos, pos)
def test_two_chunk_field(x, alpha, beta, gamma, delta):
    p = ModelParams(2, tuple(alpha), beta, gamma, delta)
    e, x1, x2, w = x
    expect = [
        alpha[0] - beta * e * (x1 + x2 + w),
        alpha[1] - x1 * (beta * w + gamma * x2) + beta * e * (x1 + 0.5 * w),
        alpha[2] - x2 * (beta * w + gamma * x1) + beta * e * (x2 + 0.5 * w),
        alpha[3] + beta * (x1 + x2) * w + 2 * gamma * x1 * x2 - delta * w,
    ]
    np.testing.assert_allclose(vector_field(p, x), expect, rtol=1e-13, atol=1e-13)


def test_zero_field_at_origin():
    p = ModelParams.build(3, {}, 1.0, 1.0, 1.0)
    assert np.all(vector_field(p, np.zeros(8)) == 0)


def test_drift_oracle_examples():
    p = ModelParams(2, (0.1, 0.2, 0.3, 0.4), 1e-300, 0.0, 0.0)
    np.testing.assert_allclose(drift_oracle(p, build_jump_set(p), np.zeros(4)), p.alpha)
    q = ModelParams.build(2, {}, beta=1e-300, gamma=1.0)
    got = drift_oracle(q, build_jump_set(q), [0, 1, 1, 0])
    np.testing.assert_allclose(got, [0, -1, -1, 2])


def _random_params(rng, n):
    return ModelParams(n, tuple(rng.uniform(0, 2, 1 << n)), rng.uniform(0.1, 3), rng.uniform(0, 3),
                       rng.uniform(0, 3))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_drift_identity_and_slow_path(n):
    rng = np.random.default_rng(100 + n)
    for _ in range(25):
        p = _random_params(rng, n)
        x = rng.uniform(0, 2, p.size)
        v = vector_field(p, x)
        oracle = drift_oracle(p, build_jump_set(p), x)
        assert np.abs(oracle - v).sum() <= 1e-12 * (1 + np.abs(v).sum())
        slow = [field_component(p, x, a) for a in range(p.size)]
        np.testing.assert_allclose(slow, v, rtol=1e-12, atol=1e-12)
        assert v.sum() == pytest.approx(p.alpha_norm - p.delta * x[p.full], abs=1e-12 * (1 + np.abs(v).sum()))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_jacobian_matches_central_differences(n):
    rng = np.random.default_rng(200 + n)
    h = 1e-6
    for _ in range(50 // 4 + 1):
        p = _random_params(rng, n)
        x = rng.uniform(0.1, 2, p.size)
        J = jacobian(p, x)
        fd = np.empty_like(J)
        for k in range(p.size):
            e = np.zeros(p.size)
            e[k] = h
            fd[:, k] = (vector_field(p, x + e) - vector_field(p, x - e)) / (2 * h)
        np.testing.assert_allclose(J, fd, atol=1e-6)


def test_jacobian_at_origin():
    assert np.all(jacobian(ModelParams.build(1, {}, 1.0), [0, 0]) == 0)
    np.testing.assert_allclose(jacobian(ModelParams.build(1, {}, 1.0, delta=0.4), [0, 0]),
                               [[0, 0], [0, -0.4]])


def test_integrator_against_scipy():
    p = ModelParams(3, tuple(np.linspace(0, 0.7, 8)), 1.3, 0.6, 0.9)
    x0 = np.linspace(0.2, 1.0, 8)
    t = np.linspace(0, 8, 33)
    ours = integrate(p, x0, 8.0, t_eval=t).states
    ref = solve_ivp(lambda _, y: vector_field(p, y), (0, 8), x0, method="DOP853", t_eval=t,
                    rtol=1e-12, atol=1e-14).y.T
    np.testing.assert_allclose(ours, ref, atol=1e-8)


def test_logistic_examples():
    assert closed_form_logistic(0.5, 1.0, 1.0) == pytest.approx(0.5 / (0.5 + 0.5 * math.e))
    assert closed_form_logistic(0.5, 1.0, 1.0) == pytest.approx(0.26894, abs=1e-5)
    assert closed_form_logistic(0.37, 2.0, 0.0) == pytest.approx(0.37)
    assert np.all(closed_form_logistic(1.0, 3.0, np.linspace(0, 100, 5)) == 1.0)
    # no overflow far out
    assert closed_form_logistic(0.5, 1.0, 1e4) == 0.0


def test_logistic_against_integrator():
    p = ModelParams.build(1, {}, 1.0)
    t = np.linspace(0, 10, 101)
    traj = integrate(p, [0.5, 0.5], 10.0, t_eval=t)
    np.testing.assert_allclose(traj.states[:, 0], closed_form_logistic(0.5, 1.0, t), atol=1e-8)


def test_constant_trajectory_when_field_vanishes():
    p = ModelParams.build(2, {}, 1.0, 1.0)
    x0 = [0, 0, 0, 2.5]
    traj = integrate(p, x0, 5.0, t_eval=[0, 1, 5])
    assert np.all(traj.states == np.array(x0))


def test_mass_and_positivity():
    cons = ModelParams.build(3, {}, 1.2, 0.8)
    x0 = np.full(8, 0.125)
    t = np.linspace(0, 20, 201)
    traj = integrate(cons, x0, 20.0, t_eval=t)
    np.testing.assert_allclose(traj.states.sum(axis=1), 1.0, atol=1e-9)
    assert traj.stats.clamped == 0
    diss = ModelParams.build(3, {}, 1.2, 0.8, 0.5)
    s = integrate(diss, x0, 20.0, t_eval=t).states.sum(axis=1)
    assert np.all(np.diff(s) <= 1e-12)
    assert traj.states[0].tolist() == x0.tolist()


def test_sir_integral_and_final_size():
    assert sir_integral(0.8, 0.8, 0.3, 2.0, 1.0) == pytest.approx(0.3)
    x0, y0, beta, delta = 1.5, 0.2, 2.0, 1.0
    p = ModelParams.build(1, {}, beta, 0.0, delta)
    end = integrate(p, [x0, y0], 200.0).final
    assert end[0] == pytest.approx(sir_final_size(x0, y0, beta, delta), abs=1e-4)
    assert end[1] < 1e-8
    with pytest.raises(ValueError):
        sir_integral(0.0, 1.0, 0.1, 1.0, 1.0)


def test_case1_closed_form():
    x0, u0, w0, beta = 0.3, 0.6, 0.1, 2.0
    assert np.allclose(closed_form_case1(x0, u0, w0, beta, 0.0), (x0, u0, w0))
    p = ModelParams.build(2, {}, beta)
    s = integrate(p, [x0, u0 / 2, u0 / 2, w0], 1.0).final
    x, u, w = closed_form_case1(x0, u0, w0, beta, 1.0)
    assert abs(s[0] - x) < 1e-6 and abs(s[1] + s[2] - u) < 1e-6 and abs(s[3] - w) < 1e-6
    assert closed_form_case1(x0, u0, w0, beta, 1e4)[2] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        closed_form_case1(0.5, 0.5, 0.0, 1.0, 1.0)


def test_integrate_rejects_bad_input():
    p = ModelParams.build(1, {}, 1.0)
    with pytest.raises(ValueError):
        integrate(p, [-0.1, 1], 1.0)
    with pytest.raises(ValueError):
        integrate(p, [0.5, 0.5], 0.0)
    with pytest.raises(ValueError):
        integrate(p, [0.5, 0.5, 0.1], 1.0)


def test_negativity_guard():
    # y' = -1 from y = 1 overshoots zero by about 5e-11: clamped and counted
    sol = _rk.solve(lambda t, y: -np.ones(1), [1.0], 0.0, 1.0 + 5e-11, tol_neg=1e-10)
    assert sol.stats.clamped >= 1 and sol.y[-1, 0] == 0
    with pytest.raises(IntegrationError):
        _rk.solve(lambda t, y: -np.ones(1), [1.0], 0.0, 1.5, tol_neg=1e-10)


def test_dense_output():
    p = ModelParams.build(1, {}, 1.0)
    traj = integrate(p, [0.9, 0.1], 4.0)
    t = np.linspace(0, 4, 57)
    np.testing.assert_allclose(traj.at(t)[:, 0], closed_form_logistic(0.9, 1.0, t), atol=1e-8)
    with pytest.raises(ValueError):
        traj.at(4.5)
