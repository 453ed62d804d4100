import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from p2pswarm import incentives as I
from p2pswarm.equilibria import equilibrium_n2_open
from p2pswarm.model import ModelParams
from p2pswarm.stochastic import SimConfig

pos = st.floats(1e-3, 1e3)


@given(pos, pos, pos, pos)
def test_q_root_residual(lam, bt, gt, d):
    u = I.q_root(lam, bt, gt, d)
    b, c = I.q_coefficients(lam, bt, gt, d)
    assert u > 0
    assert abs(I.q_value(u, lam, bt, gt, d)) <= 1e-12 * max(u * u, b * u, c)


def test_q_root_vanishes_with_arrivals():
    # u^2 ~ 2 lam / gamma_t as lam -> 0
    for lam in (1e-6, 1e-10, 1e-14):
        assert I.q_root(lam, 1.0, 1.0, 1.0) == pytest.approx(math.sqrt(2 * lam), rel=1e-2)


def test_q_root_rejects_nonpositive():
    with pytest.raises(ValueError):
        I.q_root(0.0, 1, 1, 1)


@given(pos, pos, st.floats(1.0001, 100), pos)
def test_q_tilde_root_residual(lam, beta, ratio, d):
    bt = beta * ratio
    ut = I.q_tilde_root(lam, beta, bt, d)
    p, c = I.q_tilde_coefficients(lam, beta, bt, d)
    assert ut > 0
    assert abs(I.q_tilde_value(ut, lam, beta, bt, d)) <= 1e-12 * max(ut * ut, abs(p) * ut, c)


def test_q_tilde_degenerate_equal_rates():
    assert I.q_tilde_root(1.0, 2.0, 2.0, 3.0) == pytest.approx(3 / 2 - 1 / 3)
    assert I.q_tilde_root(9.0, 2.0, 2.0, 3.0) is None
    assert I.q_tilde_root(6.0, 2.0, 2.0, 3.0) is None  # delta/beta == lam/delta
    with pytest.raises(ValueError):
        I.q_tilde_root(1.0, 2.0, 1.0, 3.0)


def test_population_gap_sign_matches_q_tilde_at_u():
    rng = np.random.default_rng(0)
    for _ in range(200):
        lam, beta, d, gt = rng.uniform(0.1, 5, 4)
        bt = beta * rng.uniform(1, 4)
        gap = (d / beta + lam / d) - equilibrium_n2_open(lam, bt, gt, d).sum()
        qt = I.q_tilde_value(I.q_root(lam, bt, gt, d), lam, beta, bt, d)
        if abs(gap) > 1e-9:
            assert (gap > 0) == (qt < 0)


def test_compare_routes_agree():
    rng = np.random.default_rng(1)
    for _ in range(500):
        lam, beta, d, gt = np.exp(rng.uniform(-2, 2, 4))
        bt = beta * rng.uniform(1, 4)
        rep = I.compare_systems(lam, beta, d, bt, gt)
        assert rep.routes_agree is True
        assert rep.split.x_star[0] < rep.baseline.x_star[0]


def test_compare_baseline_fields():
    rep = I.compare_systems(5.0, 3.0, 4.0, 3.5, 1.0)
    assert rep.baseline.norm == pytest.approx(4 / 3 + 5 / 4)
    assert rep.baseline.mean_acquisition_time == pytest.approx(rep.baseline.norm / 5 - 1 / 4)
    assert rep.split.mean_acquisition_time == pytest.approx(rep.split.norm / 5 - 1 / 4)
    assert rep.status == "ok"
    json.dumps(rep.to_dict())


def test_compare_degenerate_and_inapplicable():
    rep = I.compare_systems(9.0, 2.0, 3.0, 2.0, 1.0)
    assert rep.status == "no improvement region" and rep.improved is False and rep.routes_agree
    rep = I.compare_systems(1.0, 2.0, 3.0, 1.0, 1.0)
    assert rep.routes_agree is None and rep.u_tilde is None


def test_improves_matches_root_comparison():
    rng = np.random.default_rng(2)
    for _ in range(200):
        lam, beta, d, gt = rng.uniform(0.1, 5, 4)
        bt = beta * rng.uniform(1, 3)
        ut = I.q_tilde_root(lam, beta, bt, d)
        u = I.q_root(lam, bt, gt, d)
        if ut is not None and abs(u - ut) > 1e-9 * ut:
            assert I.improves(lam, beta, d, bt, gt) == (u < ut)


def test_lambda_threshold_brackets():
    rng = np.random.default_rng(3)
    for _ in range(20):
        beta, d, gt = rng.uniform(0.2, 3, 3)
        bt = beta * rng.uniform(1, 3)
        lam0 = I.lambda_threshold(beta, d, bt, gt)
        if math.isinf(lam0):
            assert I.improves(1e6 * d * 0.99, beta, d, bt, gt)
            continue
        assert I.improves(lam0 / 2, beta, d, bt, gt)
        assert I.improves(0.99 * lam0, beta, d, bt, gt)
        assert not I.improves(1.01 * lam0, beta, d, bt, gt)


def test_lambda_threshold_equal_rates():
    # with beta_t == beta the improvement region ends where u~ hits 0 or u catches up
    lam0 = I.lambda_threshold(1.0, 1.0, 1.0, 1.0)
    assert 0 < lam0 < 1.0
    assert I.improves(0.5 * lam0, 1.0, 1.0, 1.0, 1.0)


def test_little_vacuous_label():
    p = ModelParams.build(1, {"{}": 1.0}, 1.0, 0.0, 1.0)
    rep = I.littles_law_check(p, [1, 1], SimConfig(seed=0, t_max=10), label=1)
    assert rep.as_tuple() == (0.0, 0.0, 0.0)


def test_little_insufficient_data():
    p = ModelParams.build(1, {"{}": 1.0}, 1.0, 0.0, 1.0)
    with pytest.raises(I.InsufficientData):
        I.littles_law_check(p, [0, 1], SimConfig(seed=0, t_max=20))


def test_little_needs_open_system():
    p = ModelParams.build(1, {"{}": 1.0}, 1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        I.littles_law_check(p, [1, 1], SimConfig(seed=0, t_max=10), label=0)


def test_little_seed_arrivals():
    p = ModelParams.build(1, {"{1}": 20.0}, 0.01, 0.0, 1.0)
    rep = I.littles_law_check(p, [0, 20], SimConfig(seed=4, t_max=2000), label=1)
    assert rep.rhs == pytest.approx(20.0, rel=0.05)
    assert rep.rel_err <= 0.05


def test_time_average():
    t = np.array([0.0, 1.0, 3.0])
    v = np.array([2.0, 4.0, 6.0])
    assert I.time_average(t, v, 0.0, 4.0) == pytest.approx((2 + 8 + 6) / 4)
    assert I.time_average(t, v, 0.5, 2.0) == pytest.approx((1 + 4) / 1.5)
