import math

import numpy as np
import pytest

from finsler_hardy import finsler as fz
from finsler_hardy.families import (FamilyParams, ParameterError, calibrate_k_eps, eps0, flat_closed_forms,
                                    h_eps_profile, hyperbolic_closed_forms, log_sinh, make_family,
                                    make_flat_family, make_hyperbolic_family, sinh_bound_constants)

TH = 1.0 / 3.0


def test_parameter_domain():
    with pytest.raises(ParameterError):
        FamilyParams(3, 1.0, 0.1)
    with pytest.raises(ParameterError):
        FamilyParams(1, 2.0, 0.1)
    with pytest.raises(ParameterError):
        FamilyParams(3, 2.0, 0.0)
    with pytest.raises(ParameterError):
        FamilyParams(3, 2.0, 0.1, "hyperbolic", kappa=0.0)
    assert FamilyParams(3, 2.0, 0.1).theta == (2.0 - 1.0) / (2.0 + 1.0)


def test_flat_distance_value():
    m = make_flat_family(3, 2.0, 1.0)
    assert m.profiles.rho(1.0) == pytest.approx(5.0 / 6.0, rel=1e-15)


def test_small_theta_is_nearly_euclidean():
    m = make_flat_family(2, 1.0 + 1e-9, 0.5)
    assert m.profiles.rho(2.0) == pytest.approx(2.0, rel=1e-9)
    assert fz.eval_F(m.metric, [0.3, 0.4], [1.0, 2.0]) == pytest.approx(math.sqrt(5.0), rel=1e-9)


@pytest.mark.parametrize("kind", ["flat", "hyperbolic"])
def test_one_form_norm_below_theta(kind, rng):
    member = make_family(FamilyParams(3, 2.0, 0.2, kind))
    m = member.metric
    for _ in range(20):
        x = rng.normal(size=3)
        x *= (0.95 if kind == "hyperbolic" else 5.0) * rng.random() / np.linalg.norm(x)
        a = np.array(m.a(list(x)), dtype=float)
        b = np.array([float(c) for c in m.b(list(x))])
        norm = math.sqrt(b @ np.linalg.solve(a, b))
        s = float(np.linalg.norm(x)) if kind == "flat" else float(np.arctanh(np.linalg.norm(x)))
        assert norm == pytest.approx(s * TH * (s + 0.4) / (s + 0.2) ** 2, rel=1e-12)
        assert norm < TH


@pytest.mark.parametrize("kind", ["flat", "hyperbolic"])
def test_inverse_pair_and_monotone_distance(kind):
    member = make_family(FamilyParams(3, 2.0, 0.05, kind))
    s = np.geomspace(1e-6, 8.0, 400)
    rho = member.profiles.rho(s)
    assert np.all(np.diff(rho) > 0)
    np.testing.assert_allclose(member.profiles.phi(rho), s, rtol=1e-10)
    # derivative of phi against a central difference
    t = rho[200]
    h = 1e-6 * t
    fd = (member.profiles.phi(t + h) - member.profiles.phi(t - h)) / (2 * h)
    assert member.profiles.dphi(t) == pytest.approx(fd, rel=1e-7)


def test_hyperbolic_radial_geodesic_length(hyp_member):
    path = fz.geodesic_integrate(hyp_member.metric, [0.0, 0.0], [1.0, 0.0], 0.5, 400)
    r_end = np.linalg.norm(path.x[-1])
    expected = float(hyp_member.profiles.rho(np.arctanh(r_end)))
    assert path.length(hyp_member.metric) == pytest.approx(expected, rel=1e-6)


def test_hyperbolic_eikonal_and_gradient(hyp_member, rng):
    from conftest import random_ball_points

    m = hyp_member
    for x in random_ball_points(rng, 20, 2, 0.02, 0.95):
        d = m.drho_x(x)
        assert fz.eval_F_dual(m.metric, x, d) == pytest.approx(1.0, abs=1e-12)
        rb = np.arctanh(np.linalg.norm(x))
        assert fz.eval_F_dual(m.metric, x, -d) == pytest.approx(h_eps_profile(m.params, rb), rel=1e-11)
        np.testing.assert_allclose(fz.legendre_dual(m.metric, x, d), m.grad_rho_x(x), rtol=1e-10)
        # closed-form covector agrees with differentiating the distance
        from finsler_hardy import dual as dm

        np.testing.assert_allclose([float(c) for c in dm.gradient(m.rho_x, list(x))], d, rtol=1e-11)


def test_unweighted_density_is_busemann_hausdorff(hyp_member, rng):
    assert hyp_member.density.kind == "busemann_hausdorff"
    x = [0.3, -0.5]
    assert float(hyp_member.density.sigma(x)) == pytest.approx(fz.bh_density(hyp_member.metric, x), rel=1e-15)


def test_weighted_density(hyp_member_weighted):
    m = hyp_member_weighted
    x = [0.2, 0.1, -0.4]
    rho = float(m.rho_x(x))
    expected = math.exp(-2 * m.params.h * rho) * fz.bh_density(m.metric, x)
    assert float(m.density.sigma(x)) == pytest.approx(expected, rel=1e-14)


# ---------------------------------------------------------------- closed forms


def test_flat_closed_form_values_and_limits():
    p = FamilyParams(3, 2.0, 1.0)
    k, s, rev = flat_closed_forms(p, 0.0)
    assert k == pytest.approx(-2.0 / 3.0, rel=1e-15)
    assert rev == 1.0
    k, s, rev = flat_closed_forms(p, 1e7)
    assert abs(k) < 1e-12 and abs(s) < 1e-12 and rev == pytest.approx(2.0, rel=1e-6)
    k, s, rev = flat_closed_forms(FamilyParams(3, 2.0, 1e-7), 1.0)
    assert abs(k) < 1e-12 and abs(s) < 1e-12 and rev == pytest.approx(2.0, rel=1e-6)


def test_hyperbolic_closed_form_limits():
    p = FamilyParams(2, 2.0, 0.1, "hyperbolic", kappa=1.0)
    k = p.k_eps
    assert hyperbolic_closed_forms(p, 1e6)[0] == pytest.approx(-k * k, rel=1e-5)
    assert hyperbolic_closed_forms(p, 0.0)[0] == pytest.approx(-k * k * p.calibration[2], rel=1e-12)
    pw = FamilyParams(3, 2.0, 1e-6, "hyperbolic", kappa=1.0, h=0.3)
    kk, sb, rev = hyperbolic_closed_forms(pw, 1.5)
    assert kk == pytest.approx(-1.0, rel=1e-4)
    assert sb == pytest.approx(2 * 0.3, rel=1e-4)
    # rev tends to lam only as the radius grows as well
    assert hyperbolic_closed_forms(pw, 1e4)[2] == pytest.approx(2.0, rel=1e-4)


def test_bound_triple_on_grid():
    rs = np.geomspace(1e-3, 50.0, 100)
    for eps in np.geomspace(1e-3, 2.0, 10):
        k, s, rev = flat_closed_forms(FamilyParams(3, 2.0, eps), rs)
        assert np.all(k <= 0) and np.all(s <= 0) and np.all(rev <= 2.0)
        p = FamilyParams(3, 2.0, eps, "hyperbolic", kappa=1.0, h=0.2)
        k, s, rev = hyperbolic_closed_forms(p, rs)
        assert np.all(k <= -1.0 + 1e-9) and np.all(s <= 2 * 0.2 + 1e-9) and np.all(rev <= 2.0)


def test_h_eps_profile():
    p = FamilyParams(3, 2.0, 0.3)
    s = np.linspace(0.0, 100.0, 2001)
    h = h_eps_profile(p, s)
    assert h[0] == 1.0
    assert np.all(np.diff(h) < 0)
    assert h_eps_profile(p, 1e9) == pytest.approx(0.5, rel=1e-8)
    assert h_eps_profile(FamilyParams(3, 2.0, 0.6), 1.0) > h_eps_profile(p, 1.0)


# ---------------------------------------------------------------- calibration


def test_eps0_value():
    assert eps0(TH) == pytest.approx(math.sqrt(3.0) / 2.0, rel=1e-15)


def test_calibration_limits():
    k, _, kz, km = calibrate_k_eps(TH, 1.0, 1e-6)
    assert kz > 1e10
    assert km == pytest.approx(1.0, rel=1e-6)
    assert k == pytest.approx(1.0, rel=1e-6)
    for eps in np.linspace(1e-3, eps0(TH), 50):
        assert calibrate_k_eps(TH, 1.0, eps)[0] >= 1.0


def test_calibration_branch_above_eps0(caplog):
    k, e0, kz, km = calibrate_k_eps(TH, 2.0, 1.5)
    assert km == math.inf
    assert k == pytest.approx(max(2.0, 2.0 / math.sqrt(kz)), rel=1e-15)


def test_sinh_bound_constants():
    sb = sinh_bound_constants(TH, 1.0)
    assert 0 < sb.eps_tilde <= sb.eps_bar <= eps0(TH) / 2
    assert sb.c_tilde == min(sb.c1_tilde, sb.c2_tilde)
    assert sb.t_tilde == pytest.approx(1.0 / sb.kappa_bar, rel=1e-15)
    assert sb.kappa_bar >= 1.0


def test_flat_psi_bounds():
    n = 3
    t = np.geomspace(1e-6, 1e6, 500)
    for eps in (1e-3, 0.1, 10.0):
        m = make_flat_family(n, 2.0, eps)
        c, C = m.profiles.bounds["c"], m.profiles.bounds["C"]
        ratio = m.profiles.psi(t) / t ** (n - 1)
        assert np.all(ratio >= c * (1 - 1e-12)) and np.all(ratio <= C * (1 + 1e-12))


def test_hyperbolic_psi_bounds_below_eps_tilde():
    n = 3
    eps_tilde = sinh_bound_constants(TH, 1.0).eps_tilde
    t = np.geomspace(1e-6, 50.0, 500)
    for eps in (eps_tilde * 0.999, 0.1 * eps_tilde, 1e-3):
        m = make_hyperbolic_family(n, 2.0, 1.0, 0.0, eps)
        b = m.profiles.bounds
        log_ratio = m.profiles.log_psi(t) - (n - 1) * log_sinh(m.params.k_eps * t)
        assert np.all(log_ratio >= math.log(b["c"]) - 1e-12)
        assert np.all(log_ratio <= math.log(b["C"]) + 1e-12)


def test_member_unpacks_and_points(flat_member):
    metric, density, profiles = flat_member
    assert metric is flat_member.metric and profiles.coord == "r"
    np.testing.assert_allclose(flat_member.point_at(2.0, [0.0, 3.0, 4.0]), [0.0, 1.2, 1.6])
    table = profiles.table([0.5, 1.0], flat_member.closed_forms)
    assert set(table) == {"r", "rho", "K", "Sbar", "rev", "h_eps", "psi"}
