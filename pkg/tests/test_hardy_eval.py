import math

import pytest

from finsler_hardy.families import make_flat_family, make_hyperbolic_family
from finsler_hardy.hardy_eval import (hardy_quotient_montecarlo, hardy_quotient_radial, reduced_integral_flat,
                                      reduced_integral_hyperbolic)
from finsler_hardy.quadrature import QuadratureSpec
from finsler_hardy.riccati import LimitFunction, PairError, hardy_constant, make_truncation, preset_hardy, preset_mckean

SPEC = QuadratureSpec()


def _hardy_tent(delta, n=3):
    pair = preset_hardy(n, 2.0, 0.0)
    return pair, make_truncation(LimitFunction(pair), delta / 2, delta, delta ** 2, 2 * delta ** 2)


# ---------------------------------------------------------------- reduced integrals


def test_flat_reduced_integral_of_one():
    d = 10.0
    assert reduced_integral_flat(lambda t: 1.0, d / 2, d, 3, SPEC).value == pytest.approx(7 / 24 * d ** 3, rel=1e-12)
    assert reduced_integral_flat(lambda t: 1.0, d, d, 3, SPEC).value == 0.0


@pytest.mark.parametrize("delta", [10.0, 100.0])
def test_bulk_integral_is_logarithmic(delta):
    pair = preset_hardy(3, 2.0, 0.0)
    v = LimitFunction(pair)
    res = reduced_integral_flat(None, delta, delta ** 2, 3, SPEC,
                                log_f=lambda t: math.log(pair.w(t) * pair.W(t)) + 2 * v.log_v(t))
    assert res.value == pytest.approx(hardy_constant(3, 2.0, 0.0) * math.log(delta), rel=1e-10)


def test_hyperbolic_reduced_integral():
    res = reduced_integral_hyperbolic(lambda t: 1.0, 0.0, 1.0, 2, 1.0, 0.0, SPEC)
    assert res.value == pytest.approx(math.cosh(1.0) - 1.0, rel=1e-12)
    # h = k: integrand sinh(t) e^{-t} stays bounded by 1/2
    b = 2000.0
    res = reduced_integral_hyperbolic(lambda t: 1.0, 0.0, b, 2, 1.0, 1.0, SPEC)
    assert res.value == pytest.approx(b / 2 - (1 - math.exp(-2 * b)) / 4, rel=1e-10)
    with pytest.raises(ValueError):
        reduced_integral_hyperbolic(lambda t: 1.0, 0.0, 1.0, 1, 1.0, 0.0, SPEC)


def test_hyperbolic_reduced_integral_large_range_log_domain():
    # n = 3, k = 1: int_0^b sinh^2 = sinh(2b)/4 - b/2, here far beyond double range
    res = reduced_integral_hyperbolic(lambda t: 1.0, 0.0, 800.0, 3, 1.0, 0.0, SPEC)
    assert res.log_value == pytest.approx(1600.0 - math.log(8.0), rel=1e-13)


# ---------------------------------------------------------------- radial quotient


@pytest.mark.parametrize("knots", [(5, 10, 100, 200), (1, 2, 3, 4), (0.1, 0.2, 50, 51)])
def test_quotient_above_one_flat(knots):
    member = make_flat_family(3, 2.0, 0.1)
    pair = preset_hardy(3, 2.0, 0.0)
    br = hardy_quotient_radial(member, pair, make_truncation(LimitFunction(pair), *knots))
    assert br.Q >= 1.0
    assert br.Q <= br.upper_bound + 1e-8


@pytest.mark.parametrize("knots", [(1, 2, 3, 4), (10, 20, 30, 40), (0.5, 1, 60, 61)])
def test_quotient_above_one_hyperbolic(knots):
    member = make_hyperbolic_family(2, 2.0, 1.0, 0.0, 0.1)
    pair = preset_mckean(2, 2.0, 1.0, 0.0)
    br = hardy_quotient_radial(member, pair, make_truncation(LimitFunction(pair), *knots))
    assert br.Q >= 1.0
    assert br.Q <= br.upper_bound + 1e-8


def test_breakdown_consistency():
    member = make_flat_family(3, 2.0, 0.1)
    pair, tr = _hardy_tent(10.0)
    br = hardy_quotient_radial(member, pair, tr)
    total = br.I_ramp_left + br.I_middle + br.I_ramp_right
    assert br.Q == pytest.approx(4.0 * total / br.J, rel=1e-12)
    assert br.l1 == pytest.approx(1.0, rel=1e-14)
    assert br.middle_variants["max_form"] == br.middle_variants["signed_form"]
    # the middle piece is dominated by l1 h^p times the bulk of J
    assert br.middle_bound >= 1.0
    d = br.to_dict()
    assert d["knots"] == [5.0, 10.0, 100.0, 200.0]


def test_ramp_blow_up():
    member = make_flat_family(3, 2.0, 0.1)
    pair = preset_hardy(3, 2.0, 0.0)
    v = LimitFunction(pair)
    qs = [hardy_quotient_radial(member, pair, make_truncation(v, 10 - gap, 10, 100, 200), diagnostics=False)
          for gap in (1.0, 1e-2, 1e-4)]
    assert qs[0].I_ramp_left < qs[1].I_ramp_left < qs[2].I_ramp_left
    assert qs[0].Q < qs[1].Q < qs[2].Q
    assert qs[2].Q > 1e3


# ---------------------------------------------------------------- Monte Carlo


def test_monte_carlo_agrees_with_radial():
    member = make_flat_family(3, 2.0, 0.1)
    pair, tr = _hardy_tent(10.0)
    br = hardy_quotient_radial(member, pair, tr, diagnostics=False)
    mc = hardy_quotient_montecarlo(member, pair, tr, samples=100_000, seed=11)
    assert abs(mc.Q - br.Q) < 3 * mc.std_error


def test_monte_carlo_error_scaling():
    member = make_flat_family(3, 2.0, 0.1)
    pair, tr = _hardy_tent(10.0)
    se1 = hardy_quotient_montecarlo(member, pair, tr, samples=50_000, seed=2).std_error
    se2 = hardy_quotient_montecarlo(member, pair, tr, samples=100_000, seed=3).std_error
    assert se1 / se2 == pytest.approx(math.sqrt(2.0), rel=0.15)


def test_monte_carlo_preconditions():
    member = make_flat_family(3, 2.0, 0.1)
    pair, tr = _hardy_tent(10.0)
    with pytest.raises(ValueError):
        hardy_quotient_montecarlo(member, pair, tr, samples=100_000)
    with pytest.raises(ValueError):
        hardy_quotient_montecarlo(member, pair, tr, samples=5_000, seed=1)
    with pytest.raises(PairError):
        make_truncation(LimitFunction(pair), 3.0, 3.0, 3.0, 3.0)
