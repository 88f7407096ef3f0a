"""Riccati pairs, limit functions and tent truncations.

A pair ``(L, W)`` with weight ``w`` and order ``p`` is certified by a
positive ``G`` satisfying

    (G w)' + G w L - (p-1) G^{p'} w - W w >= 0      on (0, R),

with ``p' = p/(p-1)``.  The limit function ``v`` solves
``-(log v)' = G^{1/(p-1)}`` and the tent ``v_T`` truncates it to a compactly
supported radial profile.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from . import dual as dm

log = logging.getLogger(__name__)


class PairError(ValueError):
    pass


@dataclass(frozen=True)
class RiccatiPair:
    p: float
    w: Callable
    L: Callable
    W: Callable
    G: Callable
    R: float = math.inf
    dGw: Optional[Callable] = None  # analytic (G w)'; derived automatically when absent
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.p > 1.0:
            raise PairError("p must exceed 1")

    @property
    def p_prime(self) -> float:
        return self.p / (self.p - 1.0)

    def scaled_W(self, factor: float) -> "RiccatiPair":
        """Same pair with W multiplied by ``factor`` (G, w, L unchanged)."""
        W = self.W
        return replace(self, W=lambda t: factor * W(t), name=f"{self.name}*W{factor:g}",
                       params={**self.params, "W_scale": factor})


def _check_t(pair, t):
    ta = np.asarray(t, dtype=float)
    if np.any(ta <= 0.0) or np.any(ta >= pair.R):
        raise PairError(f"t outside (0, {pair.R})")
    return ta


def _richardson_derivative(f, t, h0=1e-3):
    """Central differences with two Richardson levels."""
    t = np.asarray(t, dtype=float)
    h = h0 * np.maximum(1.0, np.abs(t))

    def cd(hh):
        return (f(t + hh) - f(t - hh)) / (2.0 * hh)

    d1, d2, d3 = cd(h), cd(h / 2), cd(h / 4)
    e1 = (4 * d2 - d1) / 3
    e2 = (4 * d3 - d2) / 3
    return (16 * e2 - e1) / 15


def gw_derivative(pair: RiccatiPair, t):
    """(G w)'(t): analytic if provided, else dual numbers, else Richardson FD."""
    if pair.dGw is not None:
        return pair.dGw(t)

    def gw(s):
        return pair.G(s) * pair.w(s)

    try:
        return dm.primal(dm.derivative(gw, np.asarray(t, dtype=float)))
    except (TypeError, ValueError, AttributeError):
        log.debug("dual differentiation unavailable for %s; using Richardson FD", pair.name)
        return _richardson_derivative(gw, t)


def riccati_residual(pair: RiccatiPair, t):
    """(Gw)' + GwL - (p-1)G^{p'}w - Ww at t (scalar or array)."""
    t = _check_t(pair, t)
    p = pair.p
    G, w = pair.G(t), pair.w(t)
    out = gw_derivative(pair, t) + G * w * pair.L(t) - (p - 1.0) * G ** pair.p_prime * w - pair.W(t) * w
    return float(out) if np.ndim(out) == 0 else np.asarray(out, dtype=float)


def is_valid_pair(pair: RiccatiPair, grid, tol: float = 1e-12) -> bool:
    return bool(np.min(riccati_residual(pair, grid)) >= -tol)


def comparison_L(n: int, kappa: float, h: float, t):
    """(n-1) ct_kappa(t) - (n-1) h with ct_0(t) = 1/t and ct_k(t) = k coth(k t)."""
    ta = np.asarray(t, dtype=float)
    if np.any(ta <= 0.0):
        raise PairError("comparison function needs t > 0")
    if kappa == 0.0:
        ct = 1.0 / ta
    else:
        ct = kappa / np.tanh(kappa * ta)
    out = (n - 1) * ct - (n - 1) * h
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# presets


def hardy_constant(n: int, p: float, alpha: float) -> float:
    return ((n + alpha - p) / p) ** p


def mckean_constant(n: int, p: float, kappa: float, h: float) -> float:
    return ((n - 1) * (kappa - h) / p) ** p


def preset_hardy(n: int, p: float, alpha: float = 0.0) -> RiccatiPair:
    """w = t^alpha, L = (n-1)/t, W = c/t^p, G = c^{(p-1)/p}/t^{p-1}."""
    if not 1.0 < p < n + alpha:
        raise PairError("the weighted Hardy pair needs 1 < p < n + alpha")
    c = hardy_constant(n, p, alpha)
    g0 = c ** ((p - 1.0) / p)

    def w(t):
        return t ** alpha

    def L(t):
        return (n - 1) / t

    def W(t):
        return c / t ** p

    def G(t):
        return g0 / t ** (p - 1.0)

    def dGw(t):
        return g0 * (alpha - p + 1.0) * t ** (alpha - p)

    def log_v(t, t_ref=1.0):
        return -((n + alpha - p) / p) * (np.log(t) - math.log(t_ref))

    return RiccatiPair(p, w, L, W, G, math.inf, dGw, "hardy",
                       {"n": n, "p": p, "alpha": alpha, "c": c, "log_v_closed": log_v})


def preset_mckean(n: int, p: float, kappa: float, h: float = 0.0) -> RiccatiPair:
    """w = 1, L = (n-1)(kappa-h), W = c, G = c^{(p-1)/p} (all constant)."""
    if not kappa > h >= 0.0:
        raise PairError("the McKean pair needs kappa > h >= 0")
    c = mckean_constant(n, p, kappa, h)
    g0 = c ** ((p - 1.0) / p)
    lval = (n - 1) * (kappa - h)

    def const(value):
        def f(t):
            return value + 0.0 * t

        return f

    def log_v(t, t_ref=1.0):
        return -((n - 1) * (kappa - h) / p) * (np.asarray(t, dtype=float) - t_ref)

    return RiccatiPair(p, const(1.0), const(lval), const(c), const(g0), math.inf, const(0.0), "mckean",
                       {"n": n, "p": p, "kappa": kappa, "h": h, "c": c, "log_v_closed": log_v})


def tabulated_pair(p: float, table, R: float = math.inf, name: str = "tabulated") -> RiccatiPair:
    """Pair from columns (t, w, L, W, G) interpolated by cubic splines.

    ``t`` must be strictly increasing; (G w)' comes from the spline of G*w.
    Profiles are only defined on the tabulated range.
    """
    from scipy.interpolate import CubicSpline

    arr = np.asarray(table, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 5:
        raise PairError("table needs columns t, w, L, W, G")
    t = arr[:, 0]
    if np.any(np.diff(t) <= 0):
        raise PairError("t column must be strictly increasing")
    if np.any(arr[:, [1, 3, 4]] <= 0):
        raise PairError("w, W and G must be positive")
    sw, sl, sW, sg = (CubicSpline(t, arr[:, k]) for k in range(1, 5))
    sgw = CubicSpline(t, arr[:, 1] * arr[:, 4])
    lo, hi = t[0], t[-1]

    def guard(f):
        def g(x):
            xa = np.asarray(x, dtype=float)
            if np.any(xa < lo) or np.any(xa > hi):
                raise PairError(f"t outside the tabulated range [{lo}, {hi}]")
            out = f(xa)
            return float(out) if np.ndim(out) == 0 else out

        return g

    pair = RiccatiPair(p, guard(sw), guard(sl), guard(sW), guard(sg), min(R, math.inf),
                       guard(sgw.derivative()), name, {"t_min": lo, "t_max": hi})
    return pair


# ---------------------------------------------------------------------------
# limit function and truncation


class LimitFunction:
    """v(t) = exp(-int_{t_ref}^t G^{1/(p-1)}), normalised so v(t_ref) = 1.

    With ``log_substitution`` the integral is taken in s = log t, which
    tames the 1/t-type singularity of the Hardy preset at 0 and keeps
    wide ranges well resolved.
    """

    def __init__(self, pair: RiccatiPair, t_ref: float = 1.0, log_substitution: bool = True,
                 rel_tol: float = 1e-13):
        if not 0.0 < t_ref < pair.R:
            raise PairError("anchor must lie in (0, R)")
        self.pair = pair
        self.t_ref = float(t_ref)
        self.log_substitution = log_substitution
        self.rel_tol = rel_tol
        self._expo = 1.0 / (pair.p - 1.0)

    def rate(self, t):
        """-v'/v = G^{1/(p-1)}."""
        return self.pair.G(t) ** self._expo

    def _integral(self, a, b):
        if a == b:
            return 0.0
        if self.log_substitution:
            f = lambda s: float(self.rate(math.exp(s))) * math.exp(s)
            lo, hi = math.log(a), math.log(b)
        else:
            f = lambda s: float(self.rate(s))
            lo, hi = a, b
        val, err = quad(f, lo, hi, epsabs=0.0, epsrel=self.rel_tol, limit=200)
        return val

    def log_v(self, t):
        ta = _check_t(self.pair, t)
        flat = np.atleast_1d(ta).ravel()
        if flat.size > 8:
            out = self._log_v_many(flat)
        else:
            out = np.array([-self._integral(self.t_ref, float(s)) for s in flat])
        out = out.reshape(np.shape(ta))
        return float(out) if np.ndim(out) == 0 else out

    def _log_v_many(self, t):
        """Vectorised log v: composite 10-point Gauss-Legendre between sorted nodes.

        Gaps are split into panels of width at most 0.25 in the integration
        variable, so smooth rates are integrated to round-off.
        """
        xs, ws = np.polynomial.legendre.leggauss(10)
        to_var = np.log if self.log_substitution else (lambda z: z)
        order = np.argsort(t)
        nodes = np.concatenate(([to_var(self.t_ref)], to_var(t[order])))
        pts = np.sort(nodes)
        a, b = pts[:-1], pts[1:]
        width = b - a
        panels = np.maximum(1, np.ceil(width / 0.25).astype(int))
        seg_lo = np.repeat(a, panels)
        seg_idx = np.repeat(np.arange(a.size), panels)
        offs = np.concatenate([np.arange(k) for k in panels]) if panels.size else np.zeros(0, int)
        seg_w = np.repeat(width / panels, panels)
        lo = seg_lo + offs * seg_w
        mid = lo + 0.5 * seg_w
        s = mid[:, None] + 0.5 * seg_w[:, None] * xs[None, :]
        if self.log_substitution:
            vals = np.asarray(self.rate(np.exp(s)), dtype=float) * np.exp(s)
        else:
            vals = np.asarray(self.rate(s), dtype=float) * np.ones_like(s)
        seg_int = 0.5 * seg_w * (vals @ ws)
        gap = np.bincount(seg_idx, weights=seg_int, minlength=a.size)
        cum = np.concatenate(([0.0], np.cumsum(gap)))
        anchor = np.searchsorted(pts, to_var(self.t_ref))
        integral_from_ref = cum - cum[anchor]
        # map each sorted t back to its position in ``pts``
        pos = np.searchsorted(pts, to_var(t[order]))
        out = np.empty_like(t)
        out[order] = -integral_from_ref[pos]
        return out

    def __call__(self, t):
        return np.exp(self.log_v(t))

    def derivative(self, t):
        return -self.rate(t) * self(t)


def limit_function(pair: RiccatiPair, t_ref: float, t):
    return LimitFunction(pair, t_ref)(t)


@dataclass
class TruncationProfile:
    """Tent truncation: 0, linear ramp to v(t2), v, linear ramp to 0, 0."""

    t1: float
    t2: float
    t3: float
    t4: float
    v: LimitFunction
    log_v2: float = field(init=False)
    log_v3: float = field(init=False)

    def __post_init__(self):
        if not (0.0 < self.t1 < self.t2 < self.t3 < self.t4):
            raise PairError(f"knots must satisfy 0 < t1 < t2 < t3 < t4, got {self.knots}")
        if self.t4 >= self.v.pair.R:
            raise PairError("t4 must lie inside (0, R)")
        self.log_v2 = self.v.log_v(self.t2)
        self.log_v3 = self.v.log_v(self.t3)

    @property
    def knots(self):
        return (self.t1, self.t2, self.t3, self.t4)

    def log_value(self, t):
        """log v_T(t); -inf outside (t1, t4)."""
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, -np.inf)
        with np.errstate(divide="ignore"):
            left = (t > self.t1) & (t < self.t2)
            out[left] = self.log_v2 + np.log((t[left] - self.t1) / (self.t2 - self.t1))
            mid = (t >= self.t2) & (t <= self.t3)
            if np.any(mid):
                out[mid] = self.v.log_v(t[mid])
            right = (t > self.t3) & (t < self.t4)
            out[right] = self.log_v3 + np.log((self.t4 - t[right]) / (self.t4 - self.t3))
        return float(out) if out.ndim == 0 else out

    def __call__(self, t):
        return np.exp(self.log_value(t))

    def derivative(self, t, side: str = "right"):
        """v_T'(t); at a knot the one-sided value selected by ``side`` is returned."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        if side == "right":
            left = (t >= self.t1) & (t < self.t2)
            mid = (t >= self.t2) & (t < self.t3)
            right = (t >= self.t3) & (t < self.t4)
        else:
            left = (t > self.t1) & (t <= self.t2)
            mid = (t > self.t2) & (t <= self.t3)
            right = (t > self.t3) & (t <= self.t4)
        out[left] = math.exp(self.log_v2) / (self.t2 - self.t1)
        if np.any(mid):
            out[mid] = self.v.derivative(t[mid])
        out[right] = -math.exp(self.log_v3) / (self.t4 - self.t3)
        return float(out) if out.ndim == 0 else out


def make_truncation(v: LimitFunction, t1: float, t2: float, t3: float, t4: float) -> TruncationProfile:
    return TruncationProfile(float(t1), float(t2), float(t3), float(t4), v)
