import math

import numpy as np
import pytest
import sympy as sp

from finsler_hardy.riccati import (LimitFunction, PairError, RiccatiPair, comparison_L, gw_derivative,
                                   hardy_constant, is_valid_pair, make_truncation, mckean_constant, preset_hardy,
                                   preset_mckean, riccati_residual, tabulated_pair)


def test_constants():
    assert hardy_constant(3, 2.0, 0.0) == pytest.approx(0.25, rel=1e-15)
    assert mckean_constant(2, 2.0, 1.0, 0.0) == pytest.approx(0.25, rel=1e-15)
    assert 0 < hardy_constant(3, 2.999999, 0.0) < 1e-12


def test_comparison_L():
    assert comparison_L(3, 0.0, 0.0, 2.0) == pytest.approx(1.0, rel=1e-15)
    assert comparison_L(2, 1.0, 0.0, 1.0) == pytest.approx(1.0 / math.tanh(1.0), rel=1e-15)
    assert comparison_L(2, 1.0, 0.0, 1e3) == pytest.approx(1.0, rel=1e-15)


def test_hardy_residual_vanishes():
    t = np.geomspace(1e-3, 1e8, 10_000)
    for n, p, alpha in [(3, 2.0, 0.0), (5, 3.0, 1.0), (4, 1.5, -0.5)]:
        res = riccati_residual(preset_hardy(n, p, alpha), t)
        scale = np.abs(preset_hardy(n, p, alpha).W(t) * preset_hardy(n, p, alpha).w(t))
        assert np.max(np.abs(res) / scale) < 1e-12


def test_mckean_residual_matches_symbolic_substitution():
    n, p, kappa, h = sp.Integer(2), sp.Integer(2), sp.Integer(1), sp.Integer(0)
    c = ((n - 1) * (kappa - h) / p) ** p
    G = c ** ((p - 1) / p)
    w = sp.Integer(1)
    L = (n - 1) * (kappa - h)
    t = sp.symbols("t", positive=True)
    symbolic = sp.simplify(sp.diff(G * w, t) + G * w * L - (p - 1) * G ** (p / (p - 1)) * w - c * w)
    pair = preset_mckean(2, 2.0, 1.0, 0.0)
    numeric = riccati_residual(pair, np.linspace(0.01, 100.0, 1000))
    assert np.max(np.abs(numeric - float(symbolic))) < 1e-12


def test_doubled_weight_breaks_the_pair():
    pair = preset_hardy(3, 2.0, 0.0).scaled_W(2.0)
    assert not is_valid_pair(pair, np.geomspace(0.1, 10.0, 50))
    assert is_valid_pair(preset_hardy(3, 2.0, 0.0), np.geomspace(0.1, 10.0, 50))


def test_derivative_fallbacks_agree_with_analytic():
    base = preset_hardy(3, 2.0, 1.0)
    generic = RiccatiPair(base.p, base.w, base.L, base.W, base.G)
    t = np.array([0.3, 1.0, 7.0])
    np.testing.assert_allclose(gw_derivative(generic, t), base.dGw(t), rtol=1e-10)


def test_pair_validation():
    with pytest.raises(PairError):
        preset_hardy(3, 3.5, 0.0)
    with pytest.raises(PairError):
        preset_mckean(2, 2.0, 1.0, 1.5)
    with pytest.raises(PairError):
        riccati_residual(preset_hardy(3, 2.0), -1.0)


def test_tabulated_pair_reproduces_preset():
    base = preset_mckean(3, 2.0, 1.0, 0.2)
    t = np.linspace(0.5, 20.0, 200)
    table = np.column_stack([t, base.w(t), base.L(t), base.W(t), base.G(t)])
    pair = tabulated_pair(2.0, table)
    assert np.max(np.abs(riccati_residual(pair, t[5:-5]))) < 1e-12
    with pytest.raises(PairError):
        pair.G(30.0)
    bad = table.copy()
    bad[3, 4] = -1.0
    with pytest.raises(PairError):
        tabulated_pair(2.0, bad)


# ---------------------------------------------------------------- limit function


def test_hardy_limit_function_power_law():
    v = LimitFunction(preset_hardy(3, 2.0, 0.0))
    t = np.array([0.01, 0.5, 2.0, 1e4])
    np.testing.assert_allclose(v(t), t ** -0.5, rtol=1e-12)
    tt = np.geomspace(1e-2, 1e8, 500)
    np.testing.assert_allclose(v(tt) ** 2 * tt, 1.0, rtol=1e-8)


def test_mckean_limit_function_exponential():
    v = LimitFunction(preset_mckean(2, 2.0, 1.0, 0.0))
    t = np.linspace(0.0 + 1e-3, 60.0, 300)
    np.testing.assert_allclose(v(t) ** 2, np.exp(-(t - 1.0)), rtol=1e-8)


def test_unit_rate_limit_function():
    one = lambda t: 1.0 + 0.0 * np.asarray(t, dtype=float)
    pair = RiccatiPair(2.0, one, one, one, one)
    for log_sub in (True, False):
        v = LimitFunction(pair, t_ref=1.5, log_substitution=log_sub)
        assert v(4.0) == pytest.approx(math.exp(-2.5), rel=1e-13)
        np.testing.assert_allclose(v(np.linspace(0.1, 9.0, 40)), np.exp(-(np.linspace(0.1, 9.0, 40) - 1.5)),
                                   rtol=1e-12)


def test_vectorised_and_scalar_paths_agree():
    v = LimitFunction(preset_hardy(4, 2.5, 0.5))
    t = np.geomspace(0.05, 300.0, 33)
    scalar = np.array([v.log_v(float(s)) for s in t])
    np.testing.assert_allclose(v.log_v(t), scalar, rtol=1e-12, atol=1e-13)


# ---------------------------------------------------------------- truncation


def test_tent_profile():
    v = LimitFunction(preset_hardy(3, 2.0, 0.0))
    tr = make_truncation(v, 1.0, 2.0, 10.0, 12.0)
    assert tr(0.5) == 0.0 and tr(1.0) == 0.0 and tr(13.0) == 0.0
    assert tr(6.0) == pytest.approx(v(6.0), rel=1e-14)
    assert tr(2.0) == pytest.approx(v(2.0), rel=1e-14) and tr(10.0) == pytest.approx(v(10.0), rel=1e-14)
    slope = tr.derivative(np.array([10.5, 11.0, 11.9]))
    np.testing.assert_allclose(slope, -v(10.0) / 2.0, rtol=1e-14)
    assert tr.derivative(1.5) == pytest.approx(v(2.0), rel=1e-14)
    assert tr.derivative(6.0) == pytest.approx(float(v.derivative(6.0)), rel=1e-12)
    assert tr.derivative(2.0, side="left") == pytest.approx(v(2.0), rel=1e-14)


def test_tent_knots_must_be_ordered():
    v = LimitFunction(preset_hardy(3, 2.0, 0.0))
    with pytest.raises(PairError):
        make_truncation(v, 2.0, 2.0, 3.0, 4.0)
