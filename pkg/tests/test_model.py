import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from p2pswarm.labels import bits, mask_relates, popcount
from p2pswarm.model import (
    ConfigError,
    ModelParams,
    apply_generator,
    build_jump_set,
    download_rate,
    dump_params,
    estimate_rate_bounds,
    load_params,
    quadratic_max,
    swap_rate,
    total_rate,
)


def test_download_rate_examples():
    p = ModelParams.build(1, {}, beta=2.5)
    assert download_rate(p, [3.0, 4.0], 0, 1) == 2.5 * 3 * 4
    assert download_rate(p, [3.0, 4.0], 1, 1) == 0
    p3 = ModelParams.build(3, {}, beta=2.0)
    # sources C in {{1,2}, {1,2,3}}, weights 1/|C - A| = 1 and 1/2
    assert download_rate(p3, np.ones(8), 0b001, 0b011) == pytest.approx(2.0 * 1.5)


def test_swap_rate_examples():
    p2 = ModelParams.build(2, {}, beta=1.0, gamma=0.7)
    x = np.array([0, 1.0, 1.0, 0])
    assert swap_rate(p2, x, 0b01, 0b10) == pytest.approx(0.7)
    assert swap_rate(p2, x, 0b01, 0b11) == 0
    p3 = ModelParams.build(3, {}, beta=1.0, gamma=0.7)
    x3 = np.zeros(8)
    x3[0b011], x3[0b110] = 2, 3
    assert swap_rate(p3, x3, 0b011, 0b110) == pytest.approx(6 * 0.7)
    assert swap_rate(p3, x3, 0b110, 0b011) == swap_rate(p3, x3, 0b011, 0b110)


def test_n1_jump_set_matches_hand_rates():
    p = ModelParams.build(1, [1.0, 2.0], beta=3.0, delta=0.5)
    jumps = build_jump_set(p)
    assert len(jumps) == 4
    x = np.array([2.0, 5.0])
    by_zeta = {tuple(z): r for z, r in zip(jumps.zeta.tolist(), jumps.rates(x))}
    assert by_zeta == {(1, 0): 1.0, (0, 1): 2.0, (0, -1): 0.5 * 5, (-1, 1): 3.0 * 2 * 5}


def test_conservative_n1_single_jump():
    jumps = build_jump_set(ModelParams.build(1, {}, beta=1.0))
    assert len(jumps) == 1
    assert jumps.zeta.tolist() == [[-1, 1]]


def test_n2_jump_structure():
    jumps = build_jump_set(ModelParams.build(2, {}, beta=1.0, gamma=1.0))
    downloads = sorted(jv.source for jv in jumps if jv.kind == "download")
    assert downloads == [(0, 1), (0, 2), (1, 3), (2, 3)]
    swaps = [jv for jv in jumps if jv.kind == "swap"]
    assert len(swaps) == 1
    assert swaps[0].vector(4).tolist() == [0, -1, -1, 2]


def test_zeta_sums_by_kind():
    p = ModelParams(3, tuple(np.linspace(0.1, 0.8, 8)), 1.0, 1.0, 1.0)
    for jv in build_jump_set(p):
        assert jv.net == {"arrival": 1, "departure": -1, "download": 0, "swap": 0}[jv.kind]


def test_total_rate_examples():
    p = ModelParams.build(1, [1.0, 1.0], beta=1.0, delta=1.0)
    assert total_rate(p, build_jump_set(p), [2, 3]) == pytest.approx(11.0)
    cons = ModelParams.build(3, {}, beta=1.0, gamma=1.0)
    jumps = build_jump_set(cons)
    x = np.zeros(8)
    x[7] = 40
    assert total_rate(cons, jumps, x) == 0
    assert total_rate(cons, jumps, np.zeros(8)) == 0


def test_generator_examples():
    p = ModelParams.build(2, {}, beta=2.3, gamma=1.0)
    jumps = build_jump_set(p)
    x = np.array([0, 1, 1, 0])
    assert apply_generator(p, jumps, lambda y: y[3], x) == pytest.approx(2.0)
    assert apply_generator(p, jumps, lambda y: 7.0, x) == 0


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_generator_of_population_size(n):
    rng = np.random.default_rng(n)
    for _ in range(100):
        p = ModelParams(n, tuple(rng.uniform(0, 2, 1 << n)), rng.uniform(0.1, 2), rng.uniform(0, 2),
                        rng.uniform(0, 2))
        jumps = build_jump_set(p)
        x = rng.integers(0, 6, 1 << n)
        got = apply_generator(p, jumps, lambda y: y.sum(), x)
        assert got == pytest.approx(p.alpha_norm - p.delta * x[p.full], rel=1e-12, abs=1e-12)


def _swap_drift_by_tuples(p: ModelParams, x):
    """(1/2) * sum over every ordered swap tuple (A, B, A', B') of zeta * mu_{A,B}."""
    out = np.zeros(p.size)
    for a, b in itertools.product(range(p.size), repeat=2):
        if mask_relates(a, b):
            continue
        mu = p.gamma * x[a] * x[b] / (popcount(a & ~b) * popcount(b & ~a))
        for j in bits(b & ~a):
            for i in bits(a & ~b):
                z = np.zeros(p.size)
                z[a] -= 1
                z[b] -= 1
                z[a | j] += 1
                z[b | i] += 1
                out += 0.5 * mu * z
    return out


@pytest.mark.parametrize("n", [2, 3])
def test_merged_swaps_match_tuple_sum(n):
    rng = np.random.default_rng(10 + n)
    p = ModelParams.build(n, {}, beta=1.0, gamma=1.3)
    jumps = build_jump_set(p)
    swap_idx = [k for k, jv in enumerate(jumps) if jv.kind == "swap"]
    for _ in range(20):
        x = rng.uniform(0, 2, p.size)
        rates = jumps.rates(x)
        got = rates[swap_idx] @ jumps.zeta[swap_idx]
        np.testing.assert_allclose(got, _swap_drift_by_tuples(p, x), rtol=1e-12, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3), st.data())
def test_rates_respect_orthant(n, data):
    size = 1 << n
    x = np.array(data.draw(st.lists(st.integers(0, 3), min_size=size, max_size=size)))
    alpha = data.draw(st.lists(st.floats(0, 2), min_size=size, max_size=size))
    p = ModelParams(n, tuple(alpha), 1.0, data.draw(st.floats(0, 2)), data.draw(st.floats(0, 2)))
    jumps = build_jump_set(p)
    rates = jumps.rates(x)
    assert np.all(rates >= 0)
    for k in range(len(jumps)):
        if np.any(x + jumps.zeta[k] < 0):
            assert rates[k] == 0


def test_large_swap_models_need_opt_in():
    p = ModelParams.build(11, {}, beta=1.0, gamma=1.0)
    with pytest.raises(ValueError, match="allow_large"):
        build_jump_set(p)


def test_classification():
    assert ModelParams.build(1, {}, 1.0).classification == "conservative"
    assert ModelParams.build(1, {}, 1.0, delta=1).classification == "dissipative"
    assert ModelParams.build(1, {"{}": 1}, 1.0, delta=1).classification == "open"
    assert ModelParams.build(1, {"{}": 1}, 1.0).classification == "unclassified"


@pytest.mark.parametrize("kw", [dict(beta=0), dict(beta=1, gamma=-1), dict(beta=1, delta=-0.1),
                                dict(beta=float("inf"))])
def test_param_validation(kw):
    with pytest.raises(ValueError):
        ModelParams.build(2, {}, **kw)


def test_scaling():
    p = ModelParams.build(2, {"{}": 2.0}, beta=3.0, gamma=1.0, delta=0.5).scaled(100)
    assert p.alpha[0] == 200 and p.beta == pytest.approx(0.03) and p.gamma == pytest.approx(0.01)
    assert p.delta == 0.5


def test_config_roundtrip(tmp_path):
    p = ModelParams.build(3, {"{1,3}": 0.25, "{}": 2.0}, beta=1.5, gamma=0.5, delta=0.75)
    path = tmp_path / "m.json"
    dump_params(p, path)
    assert load_params(path) == p
    assert json.loads(path.read_text())["alpha"] == {"{}": 2.0, "{1,3}": 0.25}


@pytest.mark.parametrize("cfg,msg", [
    ({"alpha": {}}, "n is required"),
    ({"n": 2, "speed": 1}, "unknown"),
    ({"n": 2, "alpha": {"{3}": 1}}, r"alpha\['\{3\}'\]"),
    ({"n": 2, "beta": -1}, "beta"),
])
def test_config_errors(cfg, msg):
    with pytest.raises(ConfigError, match=msg):
        ModelParams.from_config(cfg)


def test_config_syntax_error_location(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "n": 2,\n  "beta": ,\n}')
    with pytest.raises(ConfigError, match="line 3"):
        load_params(path)


def test_rate_bound_examples():
    assert quadratic_max([(1.7, ())], 3.0) == 1.7
    assert quadratic_max([(2.0, (0, 1))], 1.0) == pytest.approx(0.5)
    assert quadratic_max([(0.8, (3,))], 2.5) == pytest.approx(2.0)
    p = ModelParams.build(1, {"{}": 1.2}, beta=2.0, delta=0.8)
    bounds = {jv.kind: b for jv, b in zip(build_jump_set(p), estimate_rate_bounds(p, build_jump_set(p), 2.5))}
    assert bounds["arrival"].M == 1.2 and bounds["arrival"].L == 0
    assert bounds["departure"].M == pytest.approx(2.0) and bounds["departure"].L == pytest.approx(0.8)
    assert bounds["download"].M == pytest.approx(2.0 * 2.5**2 / 4)


def _grid_max(terms, d, B, steps=30):
    best = -np.inf
    for comp in itertools.product(range(steps + 1), repeat=d - 1):
        if sum(comp) > steps:
            continue
        x = np.array(list(comp) + [steps - sum(comp)]) * B / steps
        v = 0.0
        for c, idx in terms:
            v += c * np.prod([x[i] for i in idx])
        best = max(best, v)
    return best


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_quadratic_max_dominates_grid(data):
    d = data.draw(st.integers(2, 4))
    B = data.draw(st.floats(0.5, 3))
    n_terms = data.draw(st.integers(1, 6))
    terms = []
    for _ in range(n_terms):
        deg = data.draw(st.integers(0, 2))
        idx = tuple(data.draw(st.integers(0, d - 1)) for _ in range(deg))
        terms.append((data.draw(st.floats(0.01, 3)), idx))
    exact = quadratic_max(terms, B)
    grid = _grid_max(terms, d, B)
    assert exact >= grid - 1e-9
    # the grid point nearest the maximiser is within B/steps per coordinate
    lip = sum(c * (len(idx) * B if idx else 0) for c, idx in terms)
    assert exact <= grid + lip * 2 * (d - 1) * B / 30 + 1e-9
