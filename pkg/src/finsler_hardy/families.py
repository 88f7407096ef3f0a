"""The two perturbed Randers families and their closed-form radial data.

``flat``: a Euclidean-based family on R^n with non-positive flag curvature
and reduced S-curvature along the radial direction.

``hyperbolic``: a Klein-ball family with flag curvature at most ``-kappa^2``
and reduced S-curvature at most ``(n-1)h`` along the radial direction,
carrying the weighted density ``exp(-(n-1)h rho) * sigma_BH``.

Both are parametrised by the target reversibility ``lam`` (through
``theta = (lam-1)/(lam+1)``) and a smoothing parameter ``eps > 0``.  Radial
profiles are plain numpy functions; the metric callables use dual-aware
arithmetic so the core engine can differentiate them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict

import numpy as np
from scipy.optimize import brentq

from . import dual as dm
from .finsler import Domain, MeasureDensity, RandersMetric, _bh_density

log = logging.getLogger(__name__)

BALL_MARGIN = 1e-9


class ParameterError(ValueError):
    pass


# ---------------------------------------------------------------------------
# calibration of the curvature scale for the hyperbolic family


def eps0(theta: float) -> float:
    """Threshold below which the radial curvature profile has an interior maximum."""
    return math.sqrt(3.0 * (1.0 - theta) / (8.0 * theta))


def k_eps0(theta: float, eps: float) -> float:
    """Normalised curvature limit at the origin, K(0) = -k^2 * K_eps0."""
    return (1.0 - theta) ** 2 * (1.0 + 3.0 * theta * (1.0 - theta) / eps ** 2)


def k_eps_max(theta: float, eps: float) -> float:
    """Normalised interior maximum of the radial curvature (inf above eps0)."""
    if eps > eps0(theta):
        return math.inf
    om = 1.0 - theta
    root = math.sqrt(max(3.0 * om ** 3 * (3.0 * om - 8.0 * eps ** 2 * theta), 0.0))
    num = 6.0 * om ** 2 * (om * (3.0 * om - 2.0 * eps ** 2 * theta) + root) ** 3
    den = (3.0 * om ** 2 + root) ** 4
    return num / den


def calibrate_k_eps(theta: float, kappa: float, eps: float):
    """Return ``(k_eps, eps0, K_eps0, K_eps)`` with k_eps = max(kappa, kappa/sqrt(K_eps0), kappa/sqrt(K_eps))."""
    if not 0.0 < theta < 1.0:
        raise ParameterError("theta must lie in (0, 1)")
    if kappa <= 0.0 or eps <= 0.0:
        raise ParameterError("kappa and eps must be positive")
    e0 = eps0(theta)
    kz = k_eps0(theta, eps)
    km = k_eps_max(theta, eps)
    cands = [kappa, kappa / math.sqrt(kz)]
    if math.isfinite(km):
        cands.append(kappa / math.sqrt(km))
    k = max(cands)
    if eps > e0:
        log.debug("eps=%g above eps0=%g: interior maximum absent, K_eps = inf", eps, e0)
    return k, e0, kz, km


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class FamilyParams:
    n: int
    lam: float
    eps: float
    kind: str = "flat"
    kappa: float = 1.0
    h: float = 0.0

    def __post_init__(self):
        if self.kind not in ("flat", "hyperbolic"):
            raise ParameterError(f"unknown family kind {self.kind!r}")
        if int(self.n) != self.n or self.n < 2:
            raise ParameterError("n must be an integer >= 2")
        if not self.lam > 1.0 or not math.isfinite(self.lam):
            raise ParameterError("lambda must lie in (1, inf); lambda = 1 gives theta = 0")
        if not self.eps > 0.0:
            raise ParameterError("eps must be positive")
        if self.kind == "hyperbolic" and not self.kappa > 0.0:
            raise ParameterError("kappa must be positive")

    @property
    def theta(self) -> float:
        return (self.lam - 1.0) / (self.lam + 1.0)

    @cached_property
    def calibration(self):
        return calibrate_k_eps(self.theta, self.kappa, self.eps)

    @property
    def k_eps(self) -> float:
        if self.kind == "flat":
            raise ParameterError("k_eps is defined for the hyperbolic family only")
        return self.calibration[0]

    @property
    def vartheta(self) -> float:
        return self.k_eps * (1.0 - self.theta)

    def with_eps(self, eps: float) -> "FamilyParams":
        return FamilyParams(self.n, self.lam, eps, self.kind, self.kappa, self.h)


# ---------------------------------------------------------------------------
# shared scalar profiles (numpy only)


def _radial_b_norm(theta, eps, s):
    """|b|_a along the radial coordinate s (r or arctanh r)."""
    s = np.asarray(s, dtype=float)
    return s * theta * (s + 2.0 * eps) / (s + eps) ** 2


def h_eps_profile(params: FamilyParams, s):
    """F*(-D rho) as a function of the radial coordinate; decreasing from 1 to 1/lam."""
    q = _radial_b_norm(params.theta, params.eps, s)
    out = (1.0 - q) / (1.0 + q)
    return float(out) if np.ndim(out) == 0 else out


def _phi_unit(theta, eps, t):
    """Inverse of r -> r(r(1-theta)+eps)/(r+eps) and its derivative, cancellation-free."""
    t = np.asarray(t, dtype=float)
    om = 1.0 - theta
    disc = np.sqrt((t - eps) ** 2 + 4.0 * om * t * eps)
    big = t >= eps
    with np.errstate(divide="ignore", invalid="ignore"):
        r_big = (t - eps + disc) / (2.0 * om)
        r_small = 2.0 * t * eps / ((eps - t) + disc)
    r = np.where(big, r_big, r_small)
    dr = (1.0 + (t + eps - 2.0 * eps * theta) / disc) / (2.0 * om)
    return r, dr


def _rho_unit(theta, eps, r):
    r = np.asarray(r, dtype=float)
    return r * (r * (1.0 - theta) + eps) / (r + eps)


def _rho_rev_unit(theta, eps, r):
    r = np.asarray(r, dtype=float)
    return r * (r * (1.0 + theta) + eps) / (r + eps)


def log_sinh(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        small = np.log(np.sinh(np.minimum(x, 20.0)))
    big = x + np.log1p(-np.exp(-2.0 * np.maximum(x, 20.0))) - math.log(2.0)
    return np.where(x > 20.0, big, small)


def _f(v):
    return float(v) if np.ndim(v) == 0 else v


# ---------------------------------------------------------------------------
# closed forms along the radial direction


def flat_closed_forms(params: FamilyParams, r):
    """(K, S_bar, rev) along y = x for the flat family, as functions of r = |x|."""
    th, e, n = params.theta, params.eps, params.n
    r = np.asarray(r, dtype=float)
    k = -3.0 * e ** 2 * (r + e) ** 4 * th * (1.0 - th) / ((r + e) ** 2 - r * (r + 2 * e) * th) ** 4
    s = -(n + 1) * e ** 2 * (r + e) * th / ((r + e) ** 4 - r ** 2 * (r + 2 * e) ** 2 * th ** 2)
    q = _radial_b_norm(th, e, r)
    rev = (1.0 + q) / (1.0 - q)
    return _f(k), _f(s), _f(rev)


def flat_reverse_curvature(params: FamilyParams, r):
    """K(x, -x) for the flat family; strictly positive for eps > 0."""
    th, e = params.theta, params.eps
    r = np.asarray(r, dtype=float)
    return _f(3.0 * e ** 2 * (r + e) ** 4 * th * (1.0 + th) / ((r + e) ** 2 + r * (r + 2 * e) * th) ** 4)


def hyperbolic_closed_forms(params: FamilyParams, rbar):
    """(K, S_bar, rev) along y = x for the hyperbolic family, as functions of arctanh|x|."""
    th, e, n, h = params.theta, params.eps, params.n, params.h
    k, vt = params.k_eps, params.vartheta
    s = np.asarray(rbar, dtype=float)
    e0 = (s + e) ** 4
    e1 = 2 * s ** 4 + 8 * s ** 3 * e + (10 * s ** 2 - 3) * e ** 2 + 4 * s * e ** 3
    e2 = s ** 4 + 4 * s ** 3 * e + (4 * s ** 2 - 3) * e ** 2
    kk = -(k ** 2) * (1 - th) ** 2 * (s + e) ** 4 * (e0 - e1 * th + e2 * th ** 2) / (
        (s + e) ** 2 - s * (s + 2 * e) * th
    ) ** 4
    sb = (n - 1) * h - vt * (n + 1) * (s + e) * th * e ** 2 / ((s + e) ** 4 - s ** 2 * (s + 2 * e) ** 2 * th ** 2)
    q = _radial_b_norm(th, e, s)
    rev = (1.0 + q) / (1.0 - q)
    return _f(kk), _f(sb), _f(rev)


# ---------------------------------------------------------------------------
# family members


@dataclass
class RadialProfiles:
    """Radial data of a family member.

    ``coord`` names the radial coordinate: ``"r"`` (flat) or ``"rbar"``
    (arctanh of the Euclidean radius, hyperbolic).  ``t`` always denotes
    the distance from the origin.
    """

    coord: str
    rho: Callable
    rho_rev: Callable
    phi: Callable
    dphi: Callable
    psi: Callable
    log_psi: Callable
    log_weight: Callable  # log e(t); identically 0 without weight
    h_eps: Callable
    sigma: Callable  # density as a function of the radial coordinate
    bounds: Dict[str, float] = field(default_factory=dict)

    def weight(self, t):
        return np.exp(self.log_weight(t))

    def table(self, grid, closed_forms):
        """Rows of (coord, rho, K, Sbar, rev, h_eps, psi) on ``grid``."""
        grid = np.asarray(grid, dtype=float)
        k, s, rev = closed_forms(grid)
        rho = self.rho(grid)
        return {
            self.coord: grid,
            "rho": rho,
            "K": np.broadcast_to(k, grid.shape),
            "Sbar": np.broadcast_to(s, grid.shape),
            "rev": np.broadcast_to(rev, grid.shape),
            "h_eps": self.h_eps(grid),
            "psi": self.psi(rho),
        }


@dataclass
class FamilyMember:
    params: FamilyParams
    metric: RandersMetric
    density: MeasureDensity
    profiles: RadialProfiles
    rho_x: Callable  # generic-scalar distance from the origin, x -> rho(x)
    drho_x: Callable  # closed-form D rho(x) (numpy, single or batched points)
    grad_rho_x: Callable  # closed-form gradient vector of rho

    def __iter__(self):
        return iter((self.metric, self.density, self.profiles))

    def closed_forms(self, s):
        if self.params.kind == "flat":
            return flat_closed_forms(self.params, s)
        return hyperbolic_closed_forms(self.params, s)

    def point_at(self, s, direction=None):
        """Euclidean point at radial coordinate ``s`` along ``direction``."""
        n = self.params.n
        d = np.zeros(n) if direction is None else np.asarray(direction, dtype=float)
        if direction is None:
            d[0] = 1.0
        d = d / np.linalg.norm(d)
        radius = s if self.params.kind == "flat" else math.tanh(s)
        return radius * d

    def radial_coord(self, x):
        r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
        return r if self.params.kind == "flat" else np.arctanh(r)


def make_flat_family(n: int, lam: float, eps: float) -> FamilyMember:
    """Flat member: a = identity, b = -theta (r+2eps)/(r+eps)^2 x."""
    params = FamilyParams(n, lam, eps, "flat")
    th = params.theta
    eye = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]

    def a(x):
        return eye

    def b(x):
        r = dm.norm(x)
        c = -th * (r + 2.0 * eps) / ((r + eps) * (r + eps))
        return [c * xi for xi in x]

    def beta(x):
        r = dm.norm(x)
        return -(r + eps * eps / (r + eps)) * th

    metric = RandersMetric(n, a, b, beta, Domain("euclidean"), name="flat")
    density = MeasureDensity(lambda x: _bh_density(metric, x), kind="busemann_hausdorff")

    def rho_x(x):
        r = dm.norm(x)
        return r * (r * (1.0 - th) + eps) / (r + eps)

    def drho_x(x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        return (1.0 / r - (r + 2 * eps) * th / (r + eps) ** 2) * x

    def grad_rho_x(x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        return (r + eps) ** 2 / (r * (r + eps) ** 2 - r ** 2 * (r + 2 * eps) * th) * x

    def phi(t):
        return _f(_phi_unit(th, eps, t)[0])

    def dphi(t):
        return _f(_phi_unit(th, eps, t)[1])

    def sigma(r):
        q = _radial_b_norm(th, eps, r)
        return _f((1.0 - q * q) ** ((n + 1) / 2.0))

    def log_psi(t):
        r, dr = _phi_unit(th, eps, t)
        q = _radial_b_norm(th, eps, r)
        with np.errstate(divide="ignore"):
            out = 0.5 * (n + 1) * np.log1p(-q * q) + (n - 1) * np.log(r) + np.log(dr)
        return _f(out)

    def psi(t):
        return _f(np.exp(log_psi(t)))

    profiles = RadialProfiles(
        coord="r",
        rho=lambda r: _f(_rho_unit(th, eps, r)),
        rho_rev=lambda r: _f(_rho_rev_unit(th, eps, r)),
        phi=phi,
        dphi=dphi,
        psi=psi,
        log_psi=log_psi,
        log_weight=lambda t: _f(np.zeros_like(np.asarray(t, dtype=float))),
        h_eps=lambda s: h_eps_profile(params, s),
        sigma=sigma,
        bounds={"c": (1.0 - th * th) ** ((n + 1) / 2.0), "C": (1.0 - th) ** (-n)},
    )
    return FamilyMember(params, metric, density, profiles, rho_x, drho_x, grad_rho_x)


def _atanh_ratio(r):
    """arctanh(r)/r, smooth through r = 0 (generic scalars)."""
    pr = np.asarray(dm.primal(r), dtype=float)
    if pr.ndim == 0:
        if pr < 1e-4:
            r2 = r * r
            return 1.0 + r2 * (1.0 / 3.0 + r2 / 5.0)
        return dm.arctanh(r) / r
    mask = (pr >= 1e-4).astype(float)
    shifted = r + (pr == 0.0) * 0.5
    r2 = r * r
    series = 1.0 + r2 * (1.0 / 3.0 + r2 / 5.0)
    return mask * (dm.arctanh(shifted) / shifted) + (1.0 - mask) * series


@dataclass(frozen=True)
class SinhBoundConstants:
    """Constants gating the sinh comparison for the hyperbolic psi bounds."""

    eps_bar: float
    kappa_bar: float
    t_tilde: float
    c1_tilde: float
    eps_tilde: float
    s_eps_tilde: float
    c2_tilde: float
    c_tilde: float


def sinh_bound_constants(theta: float, kappa: float) -> SinhBoundConstants:
    """Constructive choice of (eps_bar, kappa_bar, t_tilde, c_tilde, eps_tilde).

    eps_bar is the largest eps <= eps0/2 on which the interior-maximum branch
    of the calibration is active; kappa_bar bounds k_eps on (0, eps_bar];
    t_tilde = 1/kappa_bar; c1 is half the minimum of
    sinh((1-theta) kappa_bar t)/sinh(kappa_bar t) over [0, t_tilde]; eps_tilde
    is the largest eps <= eps_bar with t_tilde k_eps - s_eps > s_eps.
    """
    e0 = eps0(theta)

    def gap(e):
        # >= 0 when the interior-maximum branch dominates
        return k_eps0(theta, e) - k_eps_max(theta, e)

    top = 0.5 * e0
    if gap(top) >= 0.0:
        eps_bar = top
    else:
        grid = np.geomspace(1e-8, top, 400)
        ok = [e for e in grid if gap(e) >= 0.0]
        if not ok:
            raise ParameterError("no eps on which the interior-maximum branch is active")
        lo = max(ok)
        hi = grid[np.searchsorted(grid, lo) + 1]
        eps_bar = brentq(gap, lo, hi, xtol=1e-14) if gap(hi) < 0 else hi
        if gap(eps_bar) < 0:
            eps_bar = lo
    grid = np.geomspace(eps_bar * 1e-8, eps_bar, 2000)
    kappa_bar = max(calibrate_k_eps(theta, kappa, e)[0] for e in grid)
    t_tilde = 1.0 / kappa_bar
    ts = np.linspace(1e-12, t_tilde, 2001)
    ratio = np.sinh((1.0 - theta) * kappa_bar * ts) / np.sinh(kappa_bar * ts)
    c1 = 0.5 * float(np.min(ratio))

    def margin(e):
        s = e * theta / (1.0 - theta)
        return t_tilde * calibrate_k_eps(theta, kappa, e)[0] - 2.0 * s

    if margin(eps_bar) > 0.0:
        eps_tilde = eps_bar
    else:
        eps_tilde = brentq(margin, 1e-12, eps_bar, xtol=1e-14)
        eps_tilde *= 1.0 - 1e-9  # keep the strict inequality
    s_tilde = eps_tilde * theta / (1.0 - theta)
    c2 = 1.0 / (2.0 * math.cosh(s_tilde))
    return SinhBoundConstants(eps_bar, kappa_bar, t_tilde, c1, eps_tilde, s_tilde, c2, min(c1, c2))


def make_hyperbolic_family(n: int, lam: float, kappa: float, h: float, eps: float) -> FamilyMember:
    """Hyperbolic member on the unit ball with the exp(-(n-1)h rho)-weighted density."""
    params = FamilyParams(n, lam, eps, "hyperbolic", kappa, h)
    th = params.theta
    k, e0, kz, km = params.calibration
    vt = params.vartheta
    if eps > e0:
        log.info("eps=%g > eps0=%g: calibration uses the K_eps = inf branch (k_eps=%g)", eps, e0, k)
    vt2 = vt * vt

    def a(x):
        r2 = dm.dot(x, x)
        om = 1.0 - r2
        d1 = 1.0 / (vt2 * om)
        d2 = d1 / om
        return [[(d1 if i == j else 0.0) + d2 * x[i] * x[j] for j in range(n)] for i in range(n)]

    def _rbar(x):
        r = dm.norm(x)
        ratio = _atanh_ratio(r)
        return r, ratio, r * ratio

    def b(x):
        r, ratio, rb = _rbar(x)
        om = 1.0 - r * r
        c = -th * ratio * (rb + 2.0 * eps) / (vt * om * (rb + eps) * (rb + eps))
        return [c * xi for xi in x]

    def beta(x):
        _, _, rb = _rbar(x)
        return -(th / vt) * (rb + eps * eps / (rb + eps))

    metric = RandersMetric(n, a, b, beta, Domain("ball", 1.0, BALL_MARGIN), name="hyperbolic")

    def rho_x(x):
        _, _, rb = _rbar(x)
        return rb * (rb * (1.0 - th) + eps) / (vt * (rb + eps))

    def sigma_x(x):
        return dm.exp(-(n - 1) * h * rho_x(x)) * _bh_density(metric, x)

    density = MeasureDensity(sigma_x, kind="weighted" if h != 0 else "busemann_hausdorff")

    def drho_x(x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        rb = np.arctanh(r)
        coef = ((rb + eps) ** 2 - rb * (rb + 2 * eps) * th) / (vt * r * (1 - r * r) * (rb + eps) ** 2)
        return coef * x

    def grad_rho_x(x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        rb = np.arctanh(r)
        coef = vt * (1 - r * r) * (rb + eps) ** 2 / (r * ((rb + eps) ** 2 - rb * (rb + 2 * eps) * th))
        return coef * x

    def phi(t):
        return _f(_phi_unit(th, eps, vt * np.asarray(t, dtype=float))[0])

    def dphi(t):
        return _f(vt * _phi_unit(th, eps, vt * np.asarray(t, dtype=float))[1])

    def sigma(rb):
        # BH density only (no weight) as a function of arctanh r
        q = _radial_b_norm(th, eps, rb)
        return _f(vt ** (-n) * np.cosh(rb) ** (n + 1) * (1.0 - q * q) ** ((n + 1) / 2.0))

    def log_psi(t):
        rb, drb = _phi_unit(th, eps, vt * np.asarray(t, dtype=float))
        drb = vt * drb
        q = _radial_b_norm(th, eps, rb)
        with np.errstate(divide="ignore"):
            out = np.log(drb) - n * math.log(vt) + 0.5 * (n + 1) * np.log1p(-q * q) + (n - 1) * log_sinh(rb)
        return _f(out)

    def psi(t):
        return _f(np.exp(log_psi(t)))

    bounds = {"C": k / vt ** n, "k_eps": k, "eps0": e0, "K_eps0": kz, "K_eps": km}
    try:
        sb = sinh_bound_constants(th, kappa)
        bounds.update(
            {
                "c": (1.0 - th * th) ** ((n + 1) / 2.0) * sb.c_tilde ** (n - 1) / vt ** (n - 1),
                "c_tilde": sb.c_tilde,
                "c1_tilde": sb.c1_tilde,
                "c2_tilde": sb.c2_tilde,
                "eps_tilde": sb.eps_tilde,
                "eps_bar": sb.eps_bar,
                "kappa_bar": sb.kappa_bar,
                "t_tilde": sb.t_tilde,
                "s_eps": eps * th / (1.0 - th),
            }
        )
    except ParameterError as exc:  # pragma: no cover - only for extreme theta
        log.warning("sinh bound constants unavailable: %s", exc)

    profiles = RadialProfiles(
        coord="rbar",
        rho=lambda rb: _f(_rho_unit(th, eps, rb) / vt),
        rho_rev=lambda rb: _f(_rho_rev_unit(th, eps, rb) / vt),
        phi=phi,
        dphi=dphi,
        psi=psi,
        log_psi=log_psi,
        log_weight=lambda t: _f(-(n - 1) * h * np.asarray(t, dtype=float)),
        h_eps=lambda s: h_eps_profile(params, s),
        sigma=sigma,
        bounds=bounds,
    )
    return FamilyMember(params, metric, density, profiles, rho_x, drho_x, grad_rho_x)


def make_family(params: FamilyParams) -> FamilyMember:
    if params.kind == "flat":
        return make_flat_family(params.n, params.lam, params.eps)
    return make_hyperbolic_family(params.n, params.lam, params.kappa, params.h, params.eps)
