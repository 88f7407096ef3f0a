"""Sharpness sweeps: Hardy quotients along a schedule of tents.

A sweep fixes a Riccati pair and a knot rule
``t_i = coef_i * delta^power_i + offset_i``
and evaluates, for each ``delta``, the quotient of the tent ``v_T`` on the
family member with parameter ``eps(delta)``.  Along with ``Q`` it records the
three terms of the upper bound ``Q <= lam^p l2^p l1 + lam^p (C/c) l0``.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .families import FamilyParams, make_family
from .hardy_eval import (EvaluationError, QuotientBreakdown, hardy_quotient_radial, reduced_integral_flat,
                         reduced_integral_hyperbolic)
from .quadrature import QuadratureSpec, QuadResult
from .riccati import LimitFunction, RiccatiPair, make_truncation, preset_hardy, preset_mckean

log = logging.getLogger(__name__)

KNOT_RULES = {
    "hardy": ((0.5, 1.0, 0.0), (1.0, 1.0, 0.0), (1.0, 2.0, 0.0), (2.0, 2.0, 0.0)),
    "mckean": ((1.0, 1.0, 0.0), (2.0, 1.0, 0.0), (3.0, 1.0, 0.0), (4.0, 1.0, 0.0)),
}


class SweepError(ValueError):
    pass


# ---------------------------------------------------------------------------
# bound terms


def _reduced(kind, log_f, a, b, n, k_eps, h, spec) -> QuadResult:
    if kind == "flat":
        return reduced_integral_flat(None, a, b, n, spec, log_f=log_f)
    return reduced_integral_hyperbolic(None, a, b, n, k_eps, h, spec, log_f=log_f)


def compute_l0(pair: RiccatiPair, v: LimitFunction, knots, kind: str, n: int, k_eps: Optional[float] = None,
               h: float = 0.0, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Ramp-to-bulk ratio l0 with the flat (t^{n-1}) or sinh reduced integrals."""
    t1, t2, t3, t4 = knots
    p = pair.p
    if kind == "hyperbolic" and k_eps is None:
        raise ValueError("k_eps is required for the hyperbolic reduction")

    def log_w(t):
        return math.log(float(pair.w(t)))

    def log_bulk(t):
        return log_w(t) + math.log(float(pair.W(t))) + p * float(v.log_v(t))

    bulk = _reduced(kind, log_bulk, t2, t3, n, k_eps, h, spec).log_value
    left = _reduced(kind, log_w, t1, t2, n, k_eps, h, spec).log_value
    right = _reduced(kind, log_w, t3, t4, n, k_eps, h, spec).log_value
    a = p * (float(v.log_v(t2)) - math.log(t2 - t1)) + left - bulk
    b = p * (float(v.log_v(t3)) - math.log(t4 - t3)) + right - bulk
    return math.exp(a) + math.exp(b)


def compute_l1(pair: RiccatiPair, knots, grid_points: int = 257) -> float:
    """max of G^{p'}/W on [t2, t3]: log-spaced grid, then golden-section refinement."""
    _, t2, t3, _ = knots
    pp = pair.p_prime

    def ratio(t):
        return float(pair.G(t)) ** pp / float(pair.W(t))

    grid = np.geomspace(t2, t3, grid_points)
    vals = np.array([ratio(t) for t in grid])
    i = int(np.argmax(vals))
    best = float(vals[i])
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid_points - 1)]
    if hi > lo:
        res = minimize_scalar(lambda t: -ratio(t), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12 * hi})
        best = max(best, -float(res.fun))
    return best


def compute_l2(member, t2: float) -> float:
    """h_eps at the radial coordinate bounding phi from below on [t2, inf)."""
    from .hardy_eval import reversal_factor

    return reversal_factor(member, t2)


# ---------------------------------------------------------------------------
# sweep configuration


@dataclass
class SweepConfig:
    """Parameters of a sweep.

    ``knot_rule`` is ``"hardy"``, ``"mckean"`` or four ``(coef, power)`` or
    ``(coef, power, offset)`` entries.  ``eps_rule``: ``"inverse_delta"`` (eps = 1/delta),
    ``"t2_squared"`` (eps = t2(delta)^2, for knot rules with t2 -> 0) or
    ``"auto"`` which picks between the two from the schedule.
    """

    preset: str = "hardy"  # "hardy" or "mckean"
    n: int = 3
    lam: float = 2.0
    p: float = 2.0
    alpha: float = 0.0
    kappa: float = 1.0
    h: float = 0.0
    deltas: Optional[Sequence[float]] = None
    knot_rule: object = None
    eps_rule: str = "auto"
    W_scale: float = 1.0
    t_ref: float = 1.0
    tol: float = 1e-8
    workers: int = 1
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __post_init__(self):
        if self.preset not in ("hardy", "mckean"):
            raise SweepError(f"unknown preset {self.preset!r}")
        if self.knot_rule is None:
            self.knot_rule = self.preset
        if self.deltas is None:
            self.deltas = default_deltas(self.preset)
        self.deltas = [float(d) for d in self.deltas]
        if self.eps_rule not in ("auto", "inverse_delta", "t2_squared"):
            raise SweepError(f"unknown eps rule {self.eps_rule!r}")
        if not self.deltas:
            raise SweepError("empty delta schedule")
        if any(d <= 0 for d in self.deltas):
            raise SweepError("deltas must be positive")
        if any(b <= a for a, b in zip(self.deltas, self.deltas[1:])):
            raise SweepError("the delta schedule must be strictly increasing")
        if not self.W_scale > 0:
            raise SweepError("W_scale must be positive")
        self.knot_rule = resolve_knot_rule(self.knot_rule)

    @property
    def kind(self) -> str:
        return "flat" if self.preset == "hardy" else "hyperbolic"


def default_deltas(preset: str) -> List[float]:
    """Half-decades 10..10^4 for the Hardy preset, doublings 10..160 for McKean."""
    if preset == "hardy":
        return [10.0 ** (1.0 + 0.5 * k) for k in range(7)]
    return [10.0 * 2.0 ** k for k in range(5)]


def resolve_knot_rule(rule):
    if isinstance(rule, str):
        if rule not in KNOT_RULES:
            raise SweepError(f"unknown knot rule {rule!r}")
        return KNOT_RULES[rule]
    try:
        entries = tuple(tuple(float(x) for x in e) + (0.0,) * (3 - len(e)) for e in rule)
    except TypeError as exc:
        raise SweepError("knot rule entries must be sequences of numbers") from exc
    if len(entries) != 4 or any(len(e) != 3 or e[0] <= 0 for e in entries):
        raise SweepError("a knot rule needs four (coef, power[, offset]) entries with positive coefficients")
    return entries


def knots_for(rule, delta: float):
    return tuple(c * delta ** e + off for c, e, off in rule)


def choose_eps_rule(rule, deltas) -> str:
    """``t2_squared`` when t2 shrinks along the schedule towards 0, else ``inverse_delta``."""
    ds = sorted(deltas)
    first, last = knots_for(rule, ds[0])[1], knots_for(rule, ds[-1])[1]
    if len(ds) > 1 and last < first and last < 1.0:
        return "t2_squared"
    return "inverse_delta"


def eps_for(rule_name: str, knots, delta: float) -> float:
    if rule_name == "t2_squared":
        return knots[1] ** 2
    return 1.0 / delta


def make_pair(cfg: SweepConfig) -> RiccatiPair:
    if cfg.preset == "hardy":
        pair = preset_hardy(cfg.n, cfg.p, cfg.alpha)
    else:
        pair = preset_mckean(cfg.n, cfg.p, cfg.kappa, cfg.h)
    return pair if cfg.W_scale == 1.0 else pair.scaled_W(cfg.W_scale)


# ---------------------------------------------------------------------------
# rows and report


@dataclass
class SweepRow:
    delta: float
    eps: float
    knots: tuple
    Q: Optional[float]
    Q_minus_1: Optional[float] = None
    k_eps: Optional[float] = None
    I_ramp_left: Optional[float] = None
    I_middle: Optional[float] = None
    I_ramp_right: Optional[float] = None
    J: Optional[float] = None
    l0: Optional[float] = None
    l1: Optional[float] = None
    l2: Optional[float] = None
    upper_bound: Optional[float] = None
    bound_holds: Optional[bool] = None
    quad_rel_error: Optional[float] = None
    skipped: Optional[str] = None
    wall_time: float = 0.0

    def to_dict(self, timing: bool = False) -> dict:
        d = asdict(self)
        d["knots"] = list(self.knots)
        if not timing:
            d.pop("wall_time")
        return d


@dataclass
class SweepReport:
    config: dict
    eps_rule: str
    rows: List[SweepRow]
    monotone_decreasing: bool
    above_one: bool
    bound_chain_holds: bool
    terminal_gap: Optional[float]
    min_Q: Optional[float]
    log_rate_coefficient: Optional[float]
    power_rate_exponent: Optional[float]

    def to_dict(self, timing: bool = False) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "rows"}
        d["rows"] = [r.to_dict(timing) for r in self.rows]
        return d

    @property
    def evaluated(self) -> List[SweepRow]:
        return [r for r in self.rows if r.Q is not None]


def run_row(cfg: SweepConfig, delta: float, eps_rule: str) -> SweepRow:
    start = time.perf_counter()
    knots = knots_for(cfg.knot_rule, delta)
    eps = eps_for(eps_rule, knots, delta)
    row = SweepRow(delta=float(delta), eps=eps, knots=knots, Q=None)
    try:
        params = FamilyParams(cfg.n, cfg.lam, eps, cfg.kind, cfg.kappa, cfg.h)
        member = make_family(params)
        if cfg.kind == "hyperbolic":
            row.k_eps = params.k_eps
            limit = member.profiles.bounds.get("eps_tilde")
            if limit is not None and eps >= limit:
                raise SweepError(f"eps={eps:.6g} is not below eps_tilde={limit:.6g}")
        pair = make_pair(cfg)
        v = LimitFunction(pair, t_ref=cfg.t_ref, log_substitution=cfg.quadrature.log_substitution)
        trunc = make_truncation(v, *knots)
        br: QuotientBreakdown = hardy_quotient_radial(member, pair, trunc, cfg.quadrature)
    except (SweepError, EvaluationError, ValueError) as exc:
        row.skipped = str(exc)
        log.warning("delta=%g skipped: %s", delta, exc)
        row.wall_time = time.perf_counter() - start
        return row
    row.Q = br.Q
    row.Q_minus_1 = br.Q - 1.0
    row.I_ramp_left, row.I_middle, row.I_ramp_right, row.J = br.I_ramp_left, br.I_middle, br.I_ramp_right, br.J
    row.l0, row.l1, row.l2 = br.l0, br.l1, br.reversal_factor
    row.upper_bound = br.upper_bound
    if br.upper_bound is not None:
        row.bound_holds = bool(br.Q <= br.upper_bound + cfg.tol)
    row.quad_rel_error = br.quad_rel_error
    row.wall_time = time.perf_counter() - start
    log.info("delta=%g Q=%.12g l0=%.6g", delta, br.Q, br.l0)
    return row


def _fit_rates(rows: List[SweepRow]):
    """Least-squares fits of Q-1 ~ A/log(delta) and Q-1 ~ B delta^{-b}."""
    pts = [(r.delta, r.Q - 1.0) for r in rows if r.Q is not None and r.Q > 1.0 and r.delta > 1.0]
    if len(pts) < 2:
        return None, None
    d = np.array([x for x, _ in pts])
    gap = np.array([y for _, y in pts])
    inv_log = 1.0 / np.log(d)
    coef = float(np.dot(inv_log, gap) / np.dot(inv_log, inv_log))
    slope = float(np.polyfit(np.log(d), np.log(gap), 1)[0])
    return coef, -slope


def run_sweep(cfg: SweepConfig) -> SweepReport:
    eps_rule = cfg.eps_rule if cfg.eps_rule != "auto" else choose_eps_rule(cfg.knot_rule, cfg.deltas)
    deltas = [float(d) for d in cfg.deltas]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(run_row, [cfg] * len(deltas), deltas, [eps_rule] * len(deltas)))
    else:
        rows = [run_row(cfg, d, eps_rule) for d in deltas]
    good = [r for r in rows if r.Q is not None]
    qs = [r.Q for r in good]
    monotone = all(b < a for a, b in zip(qs, qs[1:])) if len(qs) > 1 else False
    above = all(q >= 1.0 - cfg.tol for q in qs) if qs else False
    chain = all(r.bound_holds is not False for r in good) and bool(good)
    coef, expo = _fit_rates(good)
    cfg_dict = asdict(cfg)
    cfg_dict["knot_rule"] = [list(p) for p in cfg.knot_rule]
    cfg_dict["deltas"] = deltas
    return SweepReport(
        config=cfg_dict,
        eps_rule=eps_rule,
        rows=rows,
        monotone_decreasing=monotone,
        above_one=above,
        bound_chain_holds=chain,
        terminal_gap=(qs[-1] - 1.0) if qs else None,
        min_Q=min(qs) if qs else None,
        log_rate_coefficient=coef,
        power_rate_exponent=expo,
    )
