"""Hardy quotients of radial tent functions on the two families.

For a family member with distance ``rho`` from the origin, a Riccati pair
``(p, w, L, W, G)`` and a tent ``u = v_T(rho)``, the quotient is

    Q = lam^p * int w(rho) F*(Du)^p dm / int w(rho) W(rho) |u|^p dm.

The radial reduction writes ``dm = psi(t) e(t) dt`` (times the angular
volume, which cancels) and ``F*(Du) = |v_T'(t)| * F*(+-D rho)`` with
``F*(D rho) = 1`` and ``F*(-D rho) = h_eps(phi(t))``.  On the left ramp the
tent increases, so the covector is a positive multiple of ``D rho``; on the
middle and right pieces it is a positive multiple of ``-D rho``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, Optional

import numpy as np

from . import dual as dm
from .families import FamilyMember, log_sinh
from .finsler import _F_dual
from .quadrature import QuadratureSpec, QuadResult, integrate_log, log_sum
from .riccati import RiccatiPair, TruncationProfile

log = logging.getLogger(__name__)


class EvaluationError(RuntimeError):
    pass


def _log(x):
    return math.log(x) if x > 0 else -math.inf


# ---------------------------------------------------------------------------
# reduced radial integrals


def reduced_integral_flat(f, a: float, b: float, n: int, spec: QuadratureSpec = QuadratureSpec(),
                          log_f=None) -> QuadResult:
    """int_a^b f(t) t^{n-1} dt for positive f (or its logarithm ``log_f``)."""
    if not 0.0 < a <= b:
        raise ValueError("need 0 < a <= b")
    lf = log_f if log_f is not None else (lambda t: _log(float(f(t))))
    return integrate_log(lambda t: lf(t) + (n - 1) * math.log(t), a, b, spec)


def reduced_integral_hyperbolic(f, a: float, b: float, n: int, k: float, h: float,
                                spec: QuadratureSpec = QuadratureSpec(), log_f=None) -> QuadResult:
    """int_a^b f(t) sinh(k t)^{n-1} e^{-(n-1) h t} dt, accumulated in the log domain."""
    if n < 2:
        raise ValueError("n >= 2 required")
    if not 0.0 <= a <= b:
        raise ValueError("need 0 <= a <= b")
    lf = log_f if log_f is not None else (lambda t: _log(float(f(t))))

    def g(t):
        if t <= 0.0:
            return -math.inf
        return lf(t) + (n - 1) * float(log_sinh(k * t)) - (n - 1) * h * t

    return integrate_log(g, a, b, spec, substitution="none")


def reduced_integral(member_kind: str, log_f, a, b, n, spec, k=None, h=0.0) -> QuadResult:
    if member_kind == "flat":
        return reduced_integral_flat(None, a, b, n, spec, log_f=log_f)
    return reduced_integral_hyperbolic(None, a, b, n, k, h, spec, log_f=log_f)


# ---------------------------------------------------------------------------
# radial quotient


@dataclass
class QuotientBreakdown:
    """Pieces of the Hardy quotient for one tent.

    ``I_*`` are the numerator pieces (without the ``lam^p`` factor) and
    ``J`` the denominator, all divided by the angular volume.  ``log_*``
    hold the same quantities as logarithms for ranges where the values
    overflow.  ``upper_bound`` is ``lam^p factor^p l1 + (lam^p C/c) l0``.
    """

    Q: float
    I_ramp_left: float
    I_middle: float
    I_ramp_right: float
    J: float
    log_I_ramp_left: float
    log_I_middle: float
    log_I_ramp_right: float
    log_J: float
    J_middle: float
    lam: float
    p: float
    eps: float
    knots: tuple
    reversal_factor: float
    l0: Optional[float] = None
    l1: Optional[float] = None
    l2: Optional[float] = None
    upper_bound: Optional[float] = None
    middle_bound: Optional[float] = None
    bound_c: Optional[float] = None
    bound_C: Optional[float] = None
    quad_rel_error: float = 0.0
    middle_variants: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["knots"] = list(self.knots)
        return d


def _piece_logs(member: FamilyMember, pair: RiccatiPair, trunc: TruncationProfile, spec: QuadratureSpec):
    prof = member.profiles
    kind = member.params.kind
    p = pair.p
    pp = pair.p_prime
    t1, t2, t3, t4 = trunc.knots
    substitution = "auto" if kind == "flat" else "none"

    def base(t):
        return (math.log(float(pair.w(t))) + float(prof.log_psi(t)) + float(prof.log_weight(t)))

    def log_h(t):
        return math.log(float(prof.h_eps(prof.phi(t))))

    def log_W(t):
        return math.log(float(pair.W(t)))

    def log_v(t):
        return float(trunc.v.log_v(t))

    def go(g, a, b):
        return integrate_log(g, a, b, spec, substitution)

    lv2, lv3 = trunc.log_v2, trunc.log_v3
    ramp_l = p * (lv2 - math.log(t2 - t1))
    ramp_r = p * (lv3 - math.log(t4 - t3))
    res = {}
    res["left_w"] = go(base, t1, t2)
    res["I_left"] = QuadResult(res["left_w"].log_value + ramp_l, res["left_w"].rel_error)
    res["I_mid"] = go(lambda t: base(t) + pp * math.log(float(pair.G(t))) + p * log_v(t) + p * log_h(t), t2, t3)
    res["I_mid_plain"] = go(lambda t: base(t) + pp * math.log(float(pair.G(t))) + p * log_v(t), t2, t3)
    res["right_wh"] = go(lambda t: base(t) + p * log_h(t), t3, t4)
    res["I_right"] = QuadResult(res["right_wh"].log_value + ramp_r, res["right_wh"].rel_error)

    def j_left(t):
        if t <= t1:
            return -math.inf
        return base(t) + log_W(t) + p * (lv2 + math.log((t - t1) / (t2 - t1)))

    def j_right(t):
        if t >= t4:
            return -math.inf
        return base(t) + log_W(t) + p * (lv3 + math.log((t4 - t) / (t4 - t3)))

    res["J_left"] = go(j_left, t1, t2)
    res["J_mid"] = go(lambda t: base(t) + log_W(t) + p * log_v(t), t2, t3)
    res["J_right"] = go(j_right, t3, t4)
    return res


def reversal_factor(member: FamilyMember, t2: float) -> float:
    """Upper bound of h_eps(phi(t)) on t >= t2 used by the bound chain."""
    prm = member.params
    if prm.kind == "flat":
        return float(member.profiles.h_eps(t2))
    return float(member.profiles.h_eps((1.0 - prm.theta) * prm.kappa * t2))


def hardy_quotient_radial(member: FamilyMember, pair: RiccatiPair, trunc: TruncationProfile,
                          spec: QuadratureSpec = QuadratureSpec(), diagnostics: bool = True) -> QuotientBreakdown:
    """Exact radial evaluation of the Hardy quotient of the tent ``trunc``."""
    prm = member.params
    p = pair.p
    lam = prm.lam
    pieces = _piece_logs(member, pair, trunc, spec)
    log_i = log_sum(pieces["I_left"].log_value, pieces["I_mid"].log_value, pieces["I_right"].log_value)
    log_j = log_sum(pieces["J_left"].log_value, pieces["J_mid"].log_value, pieces["J_right"].log_value)
    if log_j == -math.inf:
        raise EvaluationError("denominator vanished")
    q = math.exp(p * math.log(lam) + log_i - log_j)
    rel = sum(r.rel_error for r in pieces.values())
    factor = reversal_factor(member, trunc.t2)

    def ex(lv):
        return 0.0 if lv == -math.inf else (math.exp(lv) if lv < 709 else math.inf)

    out = QuotientBreakdown(
        Q=q,
        I_ramp_left=ex(pieces["I_left"].log_value),
        I_middle=ex(pieces["I_mid"].log_value),
        I_ramp_right=ex(pieces["I_right"].log_value),
        J=ex(log_j),
        log_I_ramp_left=pieces["I_left"].log_value,
        log_I_middle=pieces["I_mid"].log_value,
        log_I_ramp_right=pieces["I_right"].log_value,
        log_J=log_j,
        J_middle=ex(pieces["J_mid"].log_value),
        lam=lam,
        p=p,
        eps=prm.eps,
        knots=trunc.knots,
        reversal_factor=factor,
        quad_rel_error=rel,
    )
    # middle-piece variants relative to J: lam^p F*(Du), max F*(+-Du), F*(-sgn(u) Du)
    lp = p * math.log(lam)
    out.middle_variants = {
        "lambda_form": math.exp(lp + pieces["I_mid"].log_value - log_j),
        "max_form": math.exp(pieces["I_mid_plain"].log_value - log_j),
        "signed_form": math.exp(pieces["I_mid_plain"].log_value - log_j),
    }
    if diagnostics:
        from .sharpness import compute_l0, compute_l1

        kind = prm.kind
        k = prm.k_eps if kind == "hyperbolic" else None
        l0 = compute_l0(pair, trunc.v, trunc.knots, kind, n=prm.n, k_eps=k, h=prm.h, spec=spec)
        l1 = compute_l1(pair, trunc.knots)
        c_lo = member.profiles.bounds.get("c")
        c_hi = member.profiles.bounds["C"]
        out.l0, out.l1 = l0, l1
        out.l2 = factor if kind == "hyperbolic" else None
        out.bound_c, out.bound_C = c_lo, c_hi
        if c_lo is not None:
            out.upper_bound = lam ** p * factor ** p * l1 + lam ** p * c_hi / c_lo * l0
        # I_middle <= l1 factor^p int_{t2}^{t3} w W v^p psi e
        out.middle_bound = l1 * factor ** p * math.exp(pieces["J_mid"].log_value - pieces["I_mid"].log_value)
    return out


# ---------------------------------------------------------------------------
# Monte-Carlo cross-check


@dataclass
class MonteCarloResult:
    Q: float
    std_error: float
    samples: int
    seed: int
    numerator: float
    denominator: float


def hardy_quotient_montecarlo(member: FamilyMember, pair: RiccatiPair, trunc: TruncationProfile,
                              samples: int = 100_000, seed: Optional[int] = None,
                              batch: int = 50_000) -> MonteCarloResult:
    """n-dimensional importance-sampling estimate of the Hardy quotient.

    Points are drawn in the annulus between the Euclidean radii of the
    distance levels t1 and t4: log-uniform radius (flat) or uniform
    arctanh radius (hyperbolic), with a uniform direction.  Distance,
    covector D u and F*(D u) come from the metric through dual-number
    differentiation; no radial closed forms are used.
    """
    if seed is None:
        raise ValueError("a seed is required for reproducibility")
    if samples < 10_000:
        raise ValueError("at least 10^4 samples are required")
    prm = member.params
    n, p, lam = prm.n, pair.p, prm.lam
    rng = np.random.default_rng(seed)
    t1, _, _, t4 = trunc.knots
    lo, hi = float(member.profiles.phi(t1)), float(member.profiles.phi(t4))
    if prm.kind == "hyperbolic" and math.tanh(hi) >= 1.0 - 1e-9:
        raise EvaluationError(f"t4={t4} lies beyond the range resolvable by sampled points in the ball")
    nums, dens = [], []
    done = 0
    while done < samples:
        k = min(batch, samples - done)
        d = rng.standard_normal((k, n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        u = rng.random(k)
        if prm.kind == "flat":
            r = lo * (hi / lo) ** u
            weight = r ** n * math.log(hi / lo)
            x = d * r[:, None]
        else:
            rb = lo + (hi - lo) * u
            r = np.tanh(rb)
            weight = r ** (n - 1) / np.cosh(rb) ** 2 * (hi - lo)
            x = d * r[:, None]
        xs = [np.ascontiguousarray(x[:, i]) for i in range(n)]
        rho = np.asarray(dm.primal(member.rho_x(xs)), dtype=float)
        grad = [np.asarray(g, dtype=float) for g in dm.gradient(member.rho_x, xs)]
        slope = trunc.derivative(rho)
        du = [slope * g for g in grad]
        fstar = np.asarray(dm.primal(_F_dual(member.metric, xs, du)), dtype=float)
        sigma = np.asarray(dm.primal(member.density.sigma(xs)), dtype=float)
        wv = np.asarray(pair.w(rho), dtype=float)
        Wv = np.asarray(pair.W(rho), dtype=float)
        vt = trunc(rho)
        nums.append(wv * fstar ** p * sigma * weight)
        dens.append(wv * Wv * np.abs(vt) ** p * sigma * weight)
        done += k
    a = np.concatenate(nums)
    b = np.concatenate(dens)
    ma, mb = float(np.mean(a)), float(np.mean(b))
    ratio = ma / mb
    cov = np.cov(a, b)
    var = (cov[0, 0] - 2 * ratio * cov[0, 1] + ratio ** 2 * cov[1, 1]) / (mb ** 2 * samples)
    scale = lam ** p
    return MonteCarloResult(scale * ratio, scale * math.sqrt(max(var, 0.0)), samples, seed, ma, mb)
