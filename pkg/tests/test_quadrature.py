import numpy as np
import pytest
from hypothesis import given, strategies as st

from igafembem.quadrature import (PairClass, QuadConfig, gauss_01, gauss_legendre, log_gauss,
                                  singular_pair_rule)


def test_two_point_rule():
    r = gauss_legendre(2)
    np.testing.assert_allclose(np.sort(r.nodes), [-1 / np.sqrt(3), 1 / np.sqrt(3)], atol=1e-15)
    np.testing.assert_allclose(r.weights, [1, 1], atol=1e-15)
    assert r.integrate(lambda x: x ** 2) == pytest.approx(2 / 3, abs=1e-15)


def test_hundred_points_supported():
    r = gauss_legendre(100)
    assert len(r) == 100
    assert r.weights.sum() == pytest.approx(2.0, abs=1e-13)


@given(st.integers(1, 40))
def test_gauss_order(n):
    r = gauss_legendre(n)
    exact = lambda k: (1 - (-1) ** (k + 1)) / (k + 1)
    assert abs(r.integrate(lambda x: x ** (2 * n - 2)) - exact(2 * n - 2)) < 1e-13
    assert abs(r.integrate(lambda x: x ** (2 * n)) - exact(2 * n)) > 1e-15
    assert np.all(r.weights > 0)
    assert np.all(np.abs(r.nodes) < 1)


def test_log_gauss_examples():
    assert log_gauss(1).integrate(np.ones_like) == pytest.approx(1.0, abs=1e-15)
    assert log_gauss(1).integrate(lambda x: x) == pytest.approx(0.25, abs=1e-15)
    # int log(x) x^2 = -1/9
    assert -log_gauss(2).integrate(lambda x: x ** 2) == pytest.approx(-1 / 9, abs=1e-14)


@given(st.integers(1, 30))
def test_log_gauss_exactness(n):
    r = log_gauss(n)
    for k in (0, n, 2 * n - 1):
        assert r.integrate(lambda x: x ** k) == pytest.approx(1.0 / (k + 1) ** 2, rel=1e-13)
    assert np.all(r.weights > 0)
    assert np.all((r.nodes > 0) & (r.nodes < 1))


def test_coincident_log_integral():
    rule = singular_pair_rule(PairClass.COINCIDENT, 8)
    # -log|s-t| = -log rho with rho = |s-t|
    val = rule.integrate(lambda s, t: np.ones_like(s), log_coeff=-1.0,
                         remainder=lambda s, t: np.zeros_like(s))
    assert val == pytest.approx(1.5, abs=1e-12)


def test_adjacent_log_integral():
    rule = singular_pair_rule(PairClass.ADJACENT, 12)
    # -log(s+t) = -log rho - log((s+t)/rho)
    val = rule.integrate(lambda s, t: np.ones_like(s), log_coeff=-1.0,
                         remainder=lambda s, t: -np.log((s + t) / rule_rho(s, t)))
    assert val == pytest.approx(1.5 - 2 * np.log(2), abs=1e-10)


def rule_rho(s, t):
    return np.maximum(s, t)


def test_disjoint_is_tensor_gauss():
    rule = singular_pair_rule(PairClass.DISJOINT, 2)
    val = rule.integrate(lambda s, t: s ** 3 * t ** 3)
    assert val == pytest.approx(1 / 16, abs=1e-15)
    assert rule.w_log.size == 0


@pytest.mark.parametrize("cls", list(PairClass))
def test_pair_rules_integrate_smooth_functions(cls):
    rule = singular_pair_rule(cls, 10)
    assert rule.integrate(lambda s, t: np.exp(s - 2 * t)) == pytest.approx(
        (np.e - 1) * (1 - np.exp(-2)) / 2, rel=1e-12)
    assert np.all(rule.w > 0)
    assert np.all((rule.s >= 0) & (rule.s <= 1) & (rule.t >= 0) & (rule.t <= 1))


def test_gauss_01_measure():
    assert gauss_01(7).weights.sum() == pytest.approx(1.0, abs=1e-15)


def test_invalid_orders():
    for fn in (gauss_legendre, log_gauss):
        with pytest.raises(ValueError):
            fn(0)
    with pytest.raises(ValueError):
        singular_pair_rule(PairClass.COINCIDENT, 0)
    with pytest.raises(ValueError):
        QuadConfig(n_gauss=0)


def test_log_points_default_equal():
    assert QuadConfig(n_gauss=17).log_points == 17
    assert QuadConfig(n_gauss=17, n_log=9).log_points == 9
