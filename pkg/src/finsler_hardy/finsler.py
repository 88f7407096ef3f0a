"""Numerical engine for Randers metrics on open subsets of R^n.

A Randers metric is ``F(x, y) = sqrt(a_ij(x) y^i y^j) + b_i(x) y^i`` with
``|b|_a < 1``.  The coefficient callables ``a`` and ``b`` must be written
with :mod:`finsler_hardy.dual` arithmetic so that every quantity below can be
differentiated exactly with nested dual numbers.

Public functions accept points/vectors as 1-D arrays (single evaluation) or
2-D arrays of shape ``(N, n)`` (vectorised batch); results follow the same
convention.  Underscored helpers work on lists of generic scalars and do no
validation; they are the building blocks reused by the families module.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import dual as dm
from .dual import primal

log = logging.getLogger(__name__)

COND_LIMIT = 1e12
SMOOTH_FLOOR = 1e-12


class MetricError(ValueError):
    """Raised on domain, Randers-condition or smoothness violations."""


class ConvergenceError(RuntimeError):
    """Raised when an iterative solver misses its tolerance."""

    def __init__(self, msg, achieved):
        super().__init__(f"{msg} (achieved tolerance {achieved:.3e})")
        self.achieved = achieved


@dataclass(frozen=True)
class Domain:
    kind: str = "euclidean"  # "euclidean" or "ball"
    radius: float = 1.0
    margin: float = 0.0  # points with |x| > radius - margin are rejected

    def check(self, x):
        if self.kind == "euclidean":
            return
        r = np.sqrt(sum(np.asarray(primal(c), dtype=float) ** 2 for c in x))
        if np.any(r > self.radius - self.margin) or np.any(~np.isfinite(r)):
            raise MetricError(
                f"point outside the open ball of radius {self.radius} "
                f"(|x| = {np.max(r):.12g})"
            )


@dataclass(frozen=True)
class RandersMetric:
    dim: int
    a: Callable  # x -> n x n nested list (symmetric positive definite)
    b: Callable  # x -> length-n list (one-form)
    beta: Optional[Callable] = None  # potential with d(beta) = b, when known
    domain: Domain = Domain()
    name: str = "randers"

    def __post_init__(self):
        if self.dim < 2:
            raise MetricError("dimension must be at least 2")


@dataclass(frozen=True)
class MeasureDensity:
    sigma: Callable  # x -> positive generic scalar
    kind: str = "busemann_hausdorff"  # or "weighted"


def euclidean_metric(n: int) -> RandersMetric:
    eye = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
    return RandersMetric(n, lambda x: eye, lambda x: [0.0] * n, lambda x: 0.0, name="euclidean")


def lebesgue_density() -> MeasureDensity:
    return MeasureDensity(lambda x: 1.0, kind="lebesgue")


# ---------------------------------------------------------------------------
# input handling


def _as_vec(v, n=None):
    """Array-like -> list of n components (floats or (N,) arrays)."""
    if isinstance(v, (list, tuple)) and (len(v) == 0 or not isinstance(v[0], (list, tuple))):
        if all(isinstance(c, (int, float, np.floating, np.integer)) for c in v):
            out = [float(c) for c in v]
        else:
            out = list(v)
    else:
        arr = np.asarray(v, dtype=float)
        if arr.ndim == 1:
            out = [float(c) for c in arr]
        elif arr.ndim == 2:
            out = [np.ascontiguousarray(arr[:, i]) for i in range(arr.shape[1])]
        else:
            raise MetricError(f"expected 1-D or 2-D input, got shape {arr.shape}")
    if n is not None and len(out) != n:
        raise MetricError(f"dimension mismatch: expected {n} components, got {len(out)}")
    return out


def _out_vec(comps):
    comps = [primal(c) for c in comps]
    if any(np.ndim(c) for c in comps):
        return np.stack(np.broadcast_arrays(*comps), axis=-1)
    return np.array([float(c) for c in comps])


def _out_mat(rows):
    rows = [[primal(c) for c in row] for row in rows]
    if any(np.ndim(c) for row in rows for c in row):
        shaped = [np.stack(np.broadcast_arrays(*row), axis=-1) for row in rows]
        return np.stack(np.broadcast_arrays(*shaped), axis=-2)
    return np.array(rows, dtype=float)


def _scalar(v):
    v = primal(v)
    return float(v) if np.ndim(v) == 0 else np.asarray(v, dtype=float)


def _b_norm_sq(m, x):
    a = m.a(x)
    b = m.b(x)
    return dm.dot(b, dm.lu_solve(a, b))


def _check_point(m, x):
    m.domain.check(x)
    bb = np.asarray(primal(_b_norm_sq(m, x)), dtype=float)
    if np.any(bb >= 1.0) or np.any(~np.isfinite(bb)):
        raise MetricError(f"Randers condition violated: |b|_a = {np.sqrt(np.max(bb)):.12g} >= 1")


def _check_smooth(m, x, y):
    ny = np.sqrt(sum(np.asarray(primal(c), dtype=float) ** 2 for c in y))
    if np.any(ny == 0.0):
        raise MetricError("tangent vector must be nonzero")
    f = np.asarray(primal(_F(m, x, y)), dtype=float)
    if np.any(f < SMOOTH_FLOOR * ny):
        raise MetricError("F(x, y) below the smoothness floor; y too close to the non-smooth locus")


def _check_spd(g, what="fundamental tensor"):
    mat = _out_mat(g)
    w = np.linalg.eigvalsh(mat)
    lo, hi = w[..., 0], w[..., -1]
    if np.any(lo <= 0.0):
        raise MetricError(f"{what} is not positive definite (min eigenvalue {np.min(lo):.3e})")
    cond = hi / lo
    if np.any(cond > COND_LIMIT):
        raise MetricError(f"{what} is ill-conditioned (condition number {np.max(cond):.3e})")


# ---------------------------------------------------------------------------
# generic kernels (lists of generic scalars in, generic scalars out)


def _F(m, x, y):
    return dm.sqrt(dm.quad_form(m.a(x), y)) + dm.dot(m.b(x), y)


def _F_sq(m, x, y):
    f = _F(m, x, y)
    return f * f


def _F_dual(m, x, xi):
    a = m.a(x)
    b = m.b(x)
    ainv_b = dm.lu_solve(a, b)
    bb = dm.dot(b, ainv_b)
    xb = dm.dot(xi, ainv_b)
    xx = dm.dot(xi, dm.lu_solve(a, xi))
    one_m = 1.0 - bb
    return (dm.sqrt(one_m * xx + xb * xb) - xb) / one_m


def _legendre_dual(m, x, xi):
    f = _F_dual(m, x, xi)
    grad = dm.gradient(lambda z: _F_dual(m, x, z), xi)
    return [f * gi for gi in grad]


def _legendre(m, x, y):
    grad = dm.gradient(lambda z: _F_sq(m, x, z), y)
    return [0.5 * gi for gi in grad]


def _fundamental(m, x, y):
    h = dm.hessian(lambda z: _F_sq(m, x, z), y)
    return [[0.5 * hij for hij in row] for row in h]


def _spray(m, x, y):
    """G^i = 1/4 g^{il} (y^k d_{x^k} d_{y^l} F^2 - d_{x^l} F^2)."""
    n = len(y)
    g = _fundamental(m, x, y)
    grad_x = dm.gradient(lambda z: _F_sq(m, z, y), x)
    like = primal(y[0])
    mixed = []
    for l in range(n):
        el = dm._basis(n, l, like)
        mixed.append(
            dm.directional(
                lambda yy: dm.directional(lambda xx: _F_sq(m, xx, yy), x, y), y, el
            )
        )
    rhs = [0.25 * (mixed[l] - grad_x[l]) for l in range(n)]
    return dm.lu_solve(g, rhs)


def _spray_tensor(m, x, y):
    """G^i = 1/4 g^{il} (2 dg_{jl}/dx^k - dg_{jk}/dx^l) y^j y^k, the textbook form."""
    n = len(y)
    g = _fundamental(m, x, y)
    like = primal(y[0])
    # dg[k][j][l] = d g_{jl} / d x^k
    dg = [
        dm.directional(lambda xx: _fundamental(m, xx, y), x, dm._basis(n, k, like))
        for k in range(n)
    ]
    rhs = []
    for l in range(n):
        acc = 0.0
        for j in range(n):
            for k in range(n):
                acc = acc + (2.0 * dg[k][j][l] - dg[l][j][k]) * y[j] * y[k]
        rhs.append(0.25 * acc)
    return dm.lu_solve(g, rhs)


def _projective_factor(m, x, y):
    f, df = dm.value_and_directional(lambda xx: _F(m, xx, y), x, y)
    return df / (2.0 * f)


def _flatness_residual(m, x, y):
    n = len(y)
    grad_x = dm.gradient(lambda z: _F(m, z, y), x)
    like = primal(y[0])
    res = 0.0
    for i in range(n):
        ei = dm._basis(n, i, like)
        mixed = dm.directional(
            lambda yy: dm.directional(lambda xx: _F(m, xx, yy), x, y), y, ei
        )
        res = np.maximum(res, np.abs(primal(mixed - grad_x[i])))
    return res


def _flag_projective(m, x, y):
    f = _F(m, x, y)
    p = _projective_factor(m, x, y)
    dp = dm.directional(lambda xx: _projective_factor(m, xx, y), x, y)
    return (p * p - dp) / (f * f)


def _riemann(m, x, y, spray=_spray):
    """R^i_k = 2 dG^i/dx^k - y^j d2G^i/dx^j dy^k + 2 G^j d2G^i/dy^j dy^k - dG^i/dy^j dG^j/dy^k."""
    n = len(y)
    gval = spray(m, x, y)
    like = primal(y[0])
    a_jac = dm.jacobian(lambda xx: spray(m, xx, y), x)
    e_jac = dm.jacobian(lambda yy: spray(m, x, yy), y)
    b_cols, c_cols = [], []
    for k in range(n):
        ek = dm._basis(n, k, like)
        b_cols.append(
            dm.directional(
                lambda yy: dm.directional(lambda xx: spray(m, xx, yy), x, y), y, ek
            )
        )
        c_cols.append(
            dm.directional(
                lambda yy: dm.directional(lambda zz: spray(m, x, zz), yy, gval), y, ek
            )
        )
    r = []
    for i in range(n):
        row = []
        for k in range(n):
            ee = 0.0
            for j in range(n):
                ee = ee + e_jac[i][j] * e_jac[j][k]
            row.append(2.0 * a_jac[i][k] - b_cols[k][i] + 2.0 * c_cols[k][i] - ee)
        r.append(row)
    return r


def _flag_general(m, x, y, v, spray=_spray):
    g = _fundamental(m, x, y)
    r = _riemann(m, x, y, spray)
    rv = dm.matvec(r, v)
    num = dm.dot(dm.matvec(g, v), rv)
    gyy = dm.quad_form(g, y)
    gvv = dm.quad_form(g, v)
    gyv = dm.dot(dm.matvec(g, y), v)
    den = gyy * gvv - gyv * gyv
    return num, den


def _bh_density(m, x):
    n = m.dim
    a = m.a(x)
    bb = dm.dot(m.b(x), dm.lu_solve(a, m.b(x)))
    return (1.0 - bb) ** ((n + 1) / 2.0) * dm.sqrt(dm.det(a))


def _s_curvature(m, sigma, x, y, spray="projective"):
    n = len(y)
    like = primal(y[0])
    if spray == "projective":
        def gfun(yy):
            p = _projective_factor(m, x, yy)
            return [p * c for c in yy]
    else:
        def gfun(yy):
            return _spray(m, x, yy)
    div = 0.0
    for i in range(n):
        div = div + dm.directional(lambda yy: gfun(yy)[i], y, dm._basis(n, i, like))
    s_val, ds = dm.value_and_directional(sigma, x, y)
    return div - ds / s_val


# ---------------------------------------------------------------------------
# public operations


def eval_F(m: RandersMetric, x, y):
    """Metric value F(x, y)."""
    x = _as_vec(x, m.dim)
    y = _as_vec(y, m.dim)
    _check_point(m, x)
    return _scalar(_F(m, x, y))


def eval_F_dual(m: RandersMetric, x, xi, method: str = "closed_form"):
    """Dual metric F*(xi) = sup <xi, y> / F(y).

    ``method="closed_form"`` uses the Randers formula
    ``[sqrt((1-|b|^2)|xi|^2 + <xi,b>^2) - <xi,b>] / (1-|b|^2)`` with all
    products taken in the inverse metric ``a^{-1}``; ``method="maximize"``
    runs the generic sphere maximiser (single points only).
    """
    x = _as_vec(x, m.dim)
    xi = _as_vec(xi, m.dim)
    _check_point(m, x)
    if method == "closed_form":
        return _scalar(_F_dual(m, x, xi))
    if method == "maximize":
        return maximize_dual(m, x, xi)[0]
    raise ValueError(f"unknown method {method!r}")


def _sphere_grid(n, rng):
    if n == 2:
        ang = np.linspace(0.0, 2.0 * np.pi, 10_000, endpoint=False)
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if n == 3:
        k = np.arange(10_000) + 0.5
        z = 1.0 - 2.0 * k / 10_000
        phi = np.pi * (1.0 + 5.0 ** 0.5) * k
        rr = np.sqrt(1.0 - z * z)
        return np.stack([rr * np.cos(phi), rr * np.sin(phi), z], axis=1)
    pts = rng.standard_normal((100_000, n))
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def maximize_dual(m: RandersMetric, x, xi, tol: float = 1e-10, max_newton: int = 50, seed: int = 0):
    """Generic evaluation of F*(xi) by grid search plus Newton polish on the sphere.

    Returns ``(value, maximiser)``.  Raises :class:`ConvergenceError` if the
    projected gradient does not fall below ``tol``.
    """
    n = m.dim
    x = [float(c) for c in _as_vec(x, n)]
    xi_arr = np.asarray([float(c) for c in _as_vec(xi, n)])
    _check_point(m, x)
    if not np.any(xi_arr):
        return 0.0, np.zeros(n)
    a = np.array([[float(primal(c)) for c in row] for row in m.a(x)])
    b = np.array([float(primal(c)) for c in m.b(x)])
    pts = _sphere_grid(n, np.random.default_rng(seed))
    vals = (pts @ xi_arr) / (np.sqrt(np.einsum("ij,jk,ik->i", pts, a, pts)) + pts @ b)
    y = pts[int(np.argmax(vals))]

    def objective(z):
        return dm.dot(list(xi_arr), z) / (dm.sqrt(dm.quad_form(a.tolist(), z)) + dm.dot(list(b), z))

    achieved = np.inf
    for _ in range(max_newton):
        yl = list(y)
        grad = np.array(dm.gradient(objective, yl), dtype=float)
        proj = np.eye(n) - np.outer(y, y)
        pg = proj @ grad
        achieved = np.linalg.norm(pg)
        if achieved < tol:
            break
        hess = np.array(dm.hessian(objective, yl), dtype=float)
        hp = proj @ hess @ proj - np.outer(y, y)
        step = np.linalg.solve(hp, -pg)
        step -= y * (y @ step)
        f0 = float(objective(yl))
        scale = 1.0
        while scale > 1e-8:
            cand = y + scale * step
            cand /= np.linalg.norm(cand)
            if float(objective(list(cand))) >= f0 - 1e-15:
                break
            scale *= 0.5
        y = cand
    else:
        grad = np.array(dm.gradient(objective, list(y)), dtype=float)
        achieved = np.linalg.norm((np.eye(n) - np.outer(y, y)) @ grad)
        if achieved >= tol:
            raise ConvergenceError("dual-metric maximiser did not converge", achieved)
    return float(objective(list(y))), y / _scalar(_F(m, x, list(y)))


def legendre_dual(m: RandersMetric, x, xi):
    """Inverse Legendre transform l*(xi) = F*(xi) dF*/dxi (gradient vector of a covector)."""
    x = _as_vec(x, m.dim)
    xi = _as_vec(xi, m.dim)
    _check_point(m, x)
    norm = np.sqrt(sum(np.asarray(primal(c), dtype=float) ** 2 for c in xi))
    if np.any(norm == 0.0):
        raise MetricError("covector must be nonzero")
    return _out_vec(_legendre_dual(m, x, xi))


def legendre(m: RandersMetric, x, y):
    """Legendre transform l(y) = F(y) dF/dy = g_y(y, .)."""
    x = _as_vec(x, m.dim)
    y = _as_vec(y, m.dim)
    _check_point(m, x)
    _check_smooth(m, x, y)
    return _out_vec(_legendre(m, x, y))


def fundamental_tensor(m: RandersMetric, x, y, method: str = "dual"):
    """g_y = Hessian in y of F^2/2 (``method`` = "dual" or "fd")."""
    x = _as_vec(x, m.dim)
    y = _as_vec(y, m.dim)
    _check_point(m, x)
    _check_smooth(m, x, y)
    if method == "fd":
        return fd_fundamental_tensor(m, x, y)
    g = _fundamental(m, x, y)
    _check_spd(g)
    return _out_mat(g)


def spray_coefficients(m: RandersMetric, x, y, form: str = "contracted"):
    """Geodesic spray coefficients G^i(x, y).

    ``form="contracted"`` evaluates ``1/4 g^{il}(y^k d_xk d_yl F^2 - d_xl F^2)``;
    ``form="tensor"`` evaluates the equivalent Christoffel-type expression
    through x-derivatives of g and serves as an oracle.
    """
    x = _as_vec(x, m.dim)
    y = _as_vec(y, m.dim)
    _check_point(m, x)
    _check_smooth(m, x, y)
    _check_spd(_fundamental(m, x, y))
    fn = _spray if form == "contracted" else _spray_tensor
    return _out_vec(fn(m, x, y))


def check_projective_flatness(m: RandersMetric, x, y):
    """max_i |y^k d2F/dx^k dy^i - dF/dx^i|; zero for projectively flat metrics."""
    x = _as_vec(x, m.dim)
    y = _as_vec(y, m.dim)
    _check_point(m, x)
    _check_smooth(m, x, y)
    return _scalar(_flatness_residual(m, x, y))


def projective_factor(m: RandersMetric, x, y, flat_tol: float = 1e-7):
    """P(x, y) = (dF/dx^k y^k) / (2F) for projectively flat metrics."""
    x = _as_vec(x, m.dim)
    y = _as_vec(y, m.dim)
    _check_point(m, x)
    _check_smooth(m, x, y)
    _require_flat(m, x, y, flat_tol)
    return _scalar(_projective_factor(m, x, y))


def _require_flat(m, x, y, tol):
    res = np.max(np.asarray(_flatness_residual(m, x, y)))
    scale = max(1.0, float(np.max(np.abs(primal(_F(m, x, y))))))
    if res > tol * scale:
        raise MetricError(f"metric is not projectively flat here (residual {res:.3e})")


def flag_curvature_projective(m: RandersMetric, x, y, flat_tol: float = 1e-7):
    """K(x, y) = (P^2 - dP/dx^i y^i) / F^2 for projectively flat metrics."""
    x = _as_vec(x, m.dim)
    y = _as_vec(y, m.dim)
    _check_point(m, x)
    _check_smooth(m, x, y)
    _require_flat(m, x, y, flat_tol)
    return _scalar(_flag_projective(m, x, y))


def riemann_curvature(m: RandersMetric, x, y):
    """Riemann curvature tensor R^i_k(x, y) from the spray, as an n x n array."""
    x = _as_vec(x, m.dim)
    y = _as_vec(y, m.dim)
    _check_point(m, x)
    _check_smooth(m, x, y)
    return _out_mat(_riemann(m, x, y))


def flag_curvature_general(m: RandersMetric, x, y, v, den_tol: float = 1e-12):
    """Flag curvature K(y; v) = g_y(R_y(v), v) / (g_y(y,y) g_y(v,v) - g_y(y,v)^2)."""
    x = _as_vec(x, m.dim)
    y = _as_vec(y, m.dim)
    v = _as_vec(v, m.dim)
    _check_point(m, x)
    _check_smooth(m, x, y)
    g = _fundamental(m, x, y)
    _check_spd(g)
    num, den = _flag_general(m, x, y, v)
    den_p = np.asarray(primal(den), dtype=float)
    scale = np.asarray(primal(dm.quad_form(g, y) * dm.quad_form(g, v)), dtype=float)
    if np.any(den_p <= den_tol * scale):
        raise MetricError("degenerate flag: y and v are (nearly) parallel")
    return _scalar(num / den)


def bh_density(m: RandersMetric, x):
    """Busemann-Hausdorff density (1 - |b|_a^2)^((n+1)/2) sqrt(det a)."""
    x = _as_vec(x, m.dim)
    _check_point(m, x)
    return _scalar(_bh_density(m, x))


def bh_density_montecarlo(m: RandersMetric, x, samples: int = 1_000_000, seed: int = 0):
    """Definitional density vol(unit Euclidean ball) / vol(unit F-ball) by rejection sampling.

    Returns ``(estimate, standard_error)``.
    """
    n = m.dim
    x = [float(c) for c in _as_vec(x, n)]
    _check_point(m, x)
    a = np.array([[float(primal(c)) for c in row] for row in m.a(x)])
    b = np.array([float(primal(c)) for c in m.b(x)])
    bnorm = float(np.sqrt(b @ np.linalg.solve(a, b)))
    lam_min = float(np.linalg.eigvalsh(a)[0])
    # F(y) >= (1 - |b|_a)|y|_a >= (1 - |b|_a) sqrt(lam_min)|y|
    radius = 1.0 / ((1.0 - bnorm) * np.sqrt(lam_min))
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    chunk = 200_000
    while done < samples:
        k = min(chunk, samples - done)
        d = rng.standard_normal((k, n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        pts = d * (radius * rng.random(k) ** (1.0 / n))[:, None]
        fval = np.sqrt(np.einsum("ij,jk,ik->i", pts, a, pts)) + pts @ b
        hits += int(np.count_nonzero(fval < 1.0))
        done += k
    frac = hits / samples
    est = 1.0 / (radius ** n * frac)
    se = est * np.sqrt((1.0 - frac) / (frac * samples))
    return est, se


def bh_measure(m: RandersMetric) -> MeasureDensity:
    return MeasureDensity(lambda x: _bh_density(m, x), kind="busemann_hausdorff")


def s_curvature(m: RandersMetric, density: MeasureDensity, x, y, spray: str = "projective"):
    """S(x, y) = dG^i/dy^i - y^i d(log sigma)/dx^i."""
    x = _as_vec(x, m.dim)
    y = _as_vec(y, m.dim)
    _check_point(m, x)
    _check_smooth(m, x, y)
    sig = np.asarray(primal(density.sigma(x)), dtype=float)
    if np.any(sig <= 0.0):
        raise MetricError("density must be positive")
    return _scalar(_s_curvature(m, density.sigma, x, y, spray))


def reduced_s_curvature(m: RandersMetric, density: MeasureDensity, x, y, spray: str = "projective"):
    """S(x, y) / F(x, y)."""
    s = s_curvature(m, density, x, y, spray)
    return s / eval_F(m, x, y)


def reversibility(m: RandersMetric, x, y):
    """Pointwise ratio F(x, -y) / F(x, y)."""
    x = _as_vec(x, m.dim)
    y = _as_vec(y, m.dim)
    _check_point(m, x)
    _check_smooth(m, x, y)
    return _scalar(_F(m, x, [-c for c in y]) / _F(m, x, y))


def reversibility_dual(m: RandersMetric, x, xi):
    x = _as_vec(x, m.dim)
    xi = _as_vec(xi, m.dim)
    _check_point(m, x)
    return _scalar(_F_dual(m, x, [-c for c in xi]) / _F_dual(m, x, xi))


def laplacian(m: RandersMetric, density: MeasureDensity, u: Callable, x):
    """Finsler Laplacian (1/sigma) div(sigma l*(Du)) at x.

    ``u`` maps a list of generic scalars to a generic scalar.
    """
    n = m.dim
    x = _as_vec(x, n)
    _check_point(m, x)
    du = dm.gradient(u, x)
    dnorm = np.sqrt(sum(np.asarray(primal(c), dtype=float) ** 2 for c in du))
    if np.any(dnorm == 0.0):
        raise MetricError("vanishing gradient: the Laplacian is not smooth here")

    def flux(z):
        grad_u = dm.gradient(u, z)
        s = density.sigma(z)
        return [s * c for c in _legendre_dual(m, z, grad_u)]

    like = primal(x[0])
    div = 0.0
    for i in range(n):
        div = div + dm.directional(lambda z: flux(z)[i], x, dm._basis(n, i, like))
    return _scalar(div / density.sigma(x))


@dataclass
class GeodesicPath:
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray

    def length(self, m: RandersMetric) -> float:
        """Arc length by composite Simpson on the sampled speeds."""
        from scipy.integrate import simpson

        speeds = np.array([eval_F(m, xi, vi) for xi, vi in zip(self.x, self.v)])
        return float(simpson(speeds, x=self.t))


def geodesic_integrate(m: RandersMetric, x0, y0, t_max: float, steps: int) -> GeodesicPath:
    """Fixed-step RK4 for x'' + 2 G(x, x') = 0."""
    n = m.dim
    x = np.asarray(x0, dtype=float).copy()
    v = np.asarray(y0, dtype=float).copy()
    if not np.any(v):
        raise MetricError("initial velocity must be nonzero")
    dt = t_max / steps

    def rhs(xx, vv):
        xs = [float(c) for c in xx]
        m.domain.check(xs)
        g = _spray(m, xs, [float(c) for c in vv])
        return vv, -2.0 * np.array([float(c) for c in g])

    ts = np.linspace(0.0, t_max, steps + 1)
    xs = np.empty((steps + 1, n))
    vs = np.empty((steps + 1, n))
    xs[0], vs[0] = x, v
    for k in range(steps):
        k1x, k1v = rhs(x, v)
        k2x, k2v = rhs(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v)
        k3x, k3v = rhs(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v)
        k4x, k4v = rhs(x + dt * k3x, v + dt * k3v)
        x = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        v = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise MetricError(f"geodesic integration failed at step {k}")
        m.domain.check([float(c) for c in x])
        xs[k + 1], vs[k + 1] = x, v
    return GeodesicPath(ts, xs, vs)


# ---------------------------------------------------------------------------
# finite-difference oracles


def _fd_step(x, first=True):
    scale = max(1.0, float(np.sqrt(sum(float(c) ** 2 for c in x))))
    return (1e-5 if first else 1e-3) * scale


def _line_derivs(fun, h):
    """First and second derivatives at 0 of a scalar function by 5-point stencils."""
    f = {k: fun(k * h) for k in (-2, -1, 0, 1, 2)}
    d1 = (f[-2] - 8 * f[-1] + 8 * f[1] - f[2]) / (12 * h)
    d2 = (-f[-2] + 16 * f[-1] - 30 * f[0] + 16 * f[1] - f[2]) / (12 * h * h)
    return f[0], d1, d2


def fd_fundamental_tensor(m: RandersMetric, x, y):
    n = m.dim
    x = [float(c) for c in _as_vec(x, n)]
    y = np.array([float(c) for c in _as_vec(y, n)])
    h = 1e-3 * max(1.0, float(np.linalg.norm(y)))

    def half_sq(z):
        return 0.5 * float(_F_sq(m, x, list(z)))

    g = np.empty((n, n))
    eye = np.eye(n)
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for si, sj, w in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)):
                acc += w * half_sq(y + si * h * eye[i] + sj * h * eye[j])
            g[i, j] = acc / (4 * h * h)
    return 0.5 * (g + g.T)


def fd_flag_curvature_projective(m: RandersMetric, x, y):
    """K along a straight line from F and its first two line derivatives."""
    n = m.dim
    x = np.array([float(c) for c in _as_vec(x, n)])
    y = np.array([float(c) for c in _as_vec(y, n)])
    h = _fd_step(x, first=False) / np.linalg.norm(y)

    def along(s):
        return float(_F(m, list(x + s * y), list(y)))

    f, d1, d2 = _line_derivs(along, h)
    p = d1 / (2 * f)
    dp = (d2 * f - d1 * d1) / (2 * f * f)
    return (p * p - dp) / (f * f)


def fd_reduced_s_curvature(m: RandersMetric, density: MeasureDensity, x, y):
    """(n+1)P - y.grad(log sigma), divided by F, with line derivatives by FD."""
    n = m.dim
    x = np.array([float(c) for c in _as_vec(x, n)])
    y = np.array([float(c) for c in _as_vec(y, n)])
    h = _fd_step(x) / np.linalg.norm(y)

    def along_f(s):
        return float(_F(m, list(x + s * y), list(y)))

    def along_sig(s):
        return float(primal(density.sigma(list(x + s * y))))

    f, d1, _ = _line_derivs(along_f, h)
    sg, ds, _ = _line_derivs(along_sig, h)
    p = d1 / (2 * f)
    return ((n + 1) * p - ds / sg) / f


def fd_projective_factor(m: RandersMetric, x, y):
    n = m.dim
    x = np.array([float(c) for c in _as_vec(x, n)])
    y = np.array([float(c) for c in _as_vec(y, n)])
    h = _fd_step(x) / np.linalg.norm(y)
    f0 = float(_F(m, list(x), list(y)))
    fp = float(_F(m, list(x + h * y), list(y)))
    fm = float(_F(m, list(x - h * y), list(y)))
    return (fp - fm) / (2 * h) / (2 * f0)
