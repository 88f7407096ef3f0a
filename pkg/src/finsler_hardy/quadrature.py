"""One-dimensional quadrature with log-domain magnitudes.

Integrands are supplied as *log* integrands ``g(t)`` so that quantities like
``sinh(k t)^(n-1) e^{-(n-1)h t}`` over long ranges never overflow: the
integral of ``exp(g)`` is computed as ``exp(shift) * int exp(g - shift)``
with ``shift`` the sampled maximum of ``g``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import IntegrationWarning, quad

log = logging.getLogger(__name__)


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    method: str = "gauss-kronrod"  # or "adaptive-simpson"
    abs_tol: float = 0.0
    rel_tol: float = 1e-11
    max_subdivisions: int = 500
    log_substitution: bool = True

    def __post_init__(self):
        if self.method not in ("gauss-kronrod", "adaptive-simpson"):
            raise ValueError(f"unknown quadrature method {self.method!r}")
        if self.abs_tol < 0 or not self.rel_tol > 0:
            raise ValueError("tolerances must be positive")
        if self.abs_tol == 0 and self.rel_tol < 50 * np.finfo(float).eps:
            raise ValueError("rel_tol below 50 machine epsilons is not attainable")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be positive")


@dataclass(frozen=True)
class QuadResult:
    """Integral stored as ``log_value`` plus a relative error estimate."""

    log_value: float
    rel_error: float

    @property
    def value(self) -> float:
        if self.log_value == -math.inf:
            return 0.0
        return math.exp(self.log_value) if self.log_value < 709.0 else math.inf

    @property
    def abs_error(self) -> float:
        return self.value * self.rel_error


ZERO = QuadResult(-math.inf, 0.0)


def adaptive_simpson(f: Callable[[float], float], a: float, b: float, abs_tol: float, rel_tol: float,
                     max_subdivisions: int):
    """Adaptive Simpson with Richardson correction; returns (value, error estimate)."""

    def simpson(fa, fm, fb, h):
        return h / 6.0 * (fa + 4.0 * fm + fb)

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    whole = simpson(fa, fm, fb, b - a)
    # coarse scale for the relative test
    scale = abs(whole)
    stack = [(a, b, fa, fm, fb, whole, 0)]
    total, err_total, splits = 0.0, 0.0, 0
    while stack:
        lo, hi, flo, fmid, fhi, est, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        fl = f(0.5 * (lo + mid))
        fr = f(0.5 * (mid + hi))
        left = simpson(flo, fl, fmid, mid - lo)
        right = simpson(fmid, fr, fhi, hi - mid)
        diff = left + right - est
        width_frac = (hi - lo) / (b - a)
        tol = max(abs_tol, rel_tol * scale) * width_frac
        if abs(diff) <= 15.0 * tol or depth >= 50 or splits >= max_subdivisions:
            err_total += abs(diff) / 15.0
            total += left + right + diff / 15.0
            continue
        splits += 1
        stack.append((lo, mid, flo, fl, fmid, left, depth + 1))
        stack.append((mid, hi, fmid, fr, fhi, right, depth + 1))
        scale = max(scale, abs(left + right))
    return total, err_total


def _sample_max(g, a, b, count=65):
    ts = np.linspace(a, b, count)
    vals = np.array([float(g(float(t))) for t in ts])
    finite = vals[np.isfinite(vals)]
    if finite.size == 0:
        return -math.inf
    return float(np.max(finite))


def integrate_log(log_integrand: Callable[[float], float], a: float, b: float, spec: QuadratureSpec,
                  substitution: str = "auto") -> QuadResult:
    """Integrate ``exp(log_integrand(t))`` over [a, b].

    ``substitution``: ``"log"`` integrates in s = log t (requires a > 0),
    ``"none"`` in t, ``"auto"`` follows ``spec.log_substitution``.
    """
    if b < a:
        raise ValueError("integration bounds reversed")
    if a == b:
        return ZERO
    use_log = spec.log_substitution if substitution == "auto" else substitution == "log"
    if use_log:
        if a <= 0:
            raise ValueError("log substitution needs a > 0")
        lo, hi = math.log(a), math.log(b)

        def g(s):
            return log_integrand(math.exp(s)) + s
    else:
        lo, hi = a, b
        g = log_integrand
    shift = _sample_max(g, lo, hi)
    if shift == -math.inf:
        return ZERO

    def f(s):
        val = g(s)
        return math.exp(val - shift) if val > -math.inf else 0.0

    if spec.method == "gauss-kronrod":
        # tolerance misses are reported through QuadratureError below
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            val, err = quad(f, lo, hi, epsabs=spec.abs_tol, epsrel=spec.rel_tol, limit=spec.max_subdivisions)
    else:
        val, err = adaptive_simpson(f, lo, hi, spec.abs_tol, spec.rel_tol, spec.max_subdivisions)
    if not val > 0.0:
        if val == 0.0:
            return ZERO
        raise QuadratureError(f"non-positive integral of a positive integrand ({val})")
    rel = err / val
    tol = max(spec.rel_tol, spec.abs_tol / val if val else 0.0)
    if rel > max(100.0 * tol, 1e-8):
        raise QuadratureError(f"tolerance not met on [{a}, {b}]: relative error {rel:.3e}")
    return QuadResult(shift + math.log(val), rel)


def integrate(f: Callable[[float], float], a: float, b: float, spec: QuadratureSpec,
              substitution: str = "auto") -> QuadResult:
    """Integrate a positive function (wrapper around :func:`integrate_log`)."""

    def g(t):
        v = f(t)
        return math.log(v) if v > 0 else -math.inf

    return integrate_log(g, a, b, spec, substitution)


def log_sum(*values: float) -> float:
    finite = [v for v in values if v > -math.inf]
    if not finite:
        return -math.inf
    top = max(finite)
    return top + math.log(math.fsum(math.exp(v - top) for v in finite))
