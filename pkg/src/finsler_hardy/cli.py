"""Command-line front end.

    finsler-hardy <subcommand> --config CONFIG.yaml [--out PATH] [--format json|csv] [--seed N]

Subcommands: curvature, riccati, quotient, sweep, oracle.  Exit codes:
0 success, 1 a verdict failed, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import __version__
from .families import FamilyParams, ParameterError, make_family
from .finsler import ConvergenceError, MetricError, flag_curvature_projective, reduced_s_curvature, reversibility
from .hardy_eval import EvaluationError, hardy_quotient_montecarlo, hardy_quotient_radial
from .quadrature import QuadratureError, QuadratureSpec
from .riccati import LimitFunction, PairError, make_truncation, preset_hardy, preset_mckean, riccati_residual
from .serialize import csv_text, dumps, write_atomic
from .sharpness import SweepConfig, SweepError, run_sweep

log = logging.getLogger("finsler_hardy")

EXIT_OK, EXIT_VERDICT, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
SUBCOMMANDS = ("curvature", "riccati", "quotient", "sweep", "oracle")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration schema


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class FamilyBlock(_Strict):
    kind: Literal["flat", "hyperbolic"] = "flat"
    n: int = 3
    lam: float = 2.0
    eps: float = 0.1
    kappa: float = 1.0
    h: float = 0.0

    def params(self) -> FamilyParams:
        return FamilyParams(self.n, self.lam, self.eps, self.kind, self.kappa, self.h)


class GridBlock(_Strict):
    """Explicit ``values`` or ``count`` points between ``start`` and ``stop``."""

    values: Optional[List[float]] = None
    start: float = 0.05
    stop: float = 5.0
    count: int = Field(default=50, ge=1)
    spacing: Literal["linear", "log"] = "linear"

    def points(self) -> np.ndarray:
        if self.values is not None:
            return np.asarray(self.values, dtype=float)
        if self.spacing == "log":
            return np.geomspace(self.start, self.stop, self.count)
        return np.linspace(self.start, self.stop, self.count)


class PairBlock(_Strict):
    preset: Literal["hardy", "mckean"] = "hardy"
    n: int = 3
    p: float = 2.0
    alpha: float = 0.0
    kappa: float = 1.0
    h: float = 0.0
    W_scale: float = Field(default=1.0, gt=0)
    t_ref: float = Field(default=1.0, gt=0)

    def build(self):
        if self.preset == "hardy":
            pair = preset_hardy(self.n, self.p, self.alpha)
        else:
            pair = preset_mckean(self.n, self.p, self.kappa, self.h)
        return pair if self.W_scale == 1.0 else pair.scaled_W(self.W_scale)


class QuadratureBlock(_Strict):
    method: Literal["gauss-kronrod", "adaptive-simpson"] = "gauss-kronrod"
    abs_tol: float = 0.0
    rel_tol: float = 1e-11
    max_subdivisions: int = 500
    log_substitution: bool = True

    def spec(self) -> QuadratureSpec:
        return QuadratureSpec(self.method, self.abs_tol, self.rel_tol, self.max_subdivisions, self.log_substitution)


class MonteCarloBlock(_Strict):
    samples: int = Field(default=100_000, ge=10_000)
    seed: Optional[int] = None


class ToleranceBlock(_Strict):
    oracle: float = 1e-6
    bound: float = 1e-9
    residual: float = 1e-12
    quotient: float = 1e-8
    baseline: float = 1e-6


class SweepBlock(_Strict):
    preset: Literal["hardy", "mckean"] = "hardy"
    n: int = 3
    lam: float = 2.0
    p: float = 2.0
    alpha: float = 0.0
    kappa: float = 1.0
    h: float = 0.0
    deltas: Optional[List[float]] = None
    knot_rule: Union[Literal["hardy", "mckean"], List[List[float]], None] = None
    eps_rule: Literal["auto", "inverse_delta", "t2_squared"] = "auto"
    W_scale: float = Field(default=1.0, gt=0)
    t_ref: float = Field(default=1.0, gt=0)
    workers: int = Field(default=1, ge=1)
    baseline: Optional[str] = None  # compare Q against a stored oracle baseline

    def build(self, quad: QuadratureSpec, tol: float) -> SweepConfig:
        fields = self.model_dump(exclude={"baseline"})
        return SweepConfig(**fields, tol=tol, quadrature=quad)


class OutputBlock(_Strict):
    path: Optional[str] = None
    format: Literal["json", "csv"] = "json"


class OracleBlock(_Strict):
    out_dir: str = "tests/baselines"
    hardy: SweepBlock = Field(default_factory=lambda: SweepBlock(preset="hardy", n=3, lam=2.0))
    mckean: SweepBlock = Field(default_factory=lambda: SweepBlock(preset="mckean", n=2, lam=2.0, kappa=1.0,
                                                                  deltas=[10.0, 20.0, 40.0, 80.0]))


class RunConfig(_Strict):
    subcommand: Optional[Literal["curvature", "riccati", "quotient", "sweep", "oracle"]] = None
    seed: int = 0
    family: FamilyBlock = Field(default_factory=FamilyBlock)
    grid: GridBlock = Field(default_factory=GridBlock)
    pair: PairBlock = Field(default_factory=PairBlock)
    knots: Optional[Tuple[float, float, float, float]] = None
    quadrature: QuadratureBlock = Field(default_factory=QuadratureBlock)
    montecarlo: Optional[MonteCarloBlock] = None
    tolerances: ToleranceBlock = Field(default_factory=ToleranceBlock)
    sweep: SweepBlock = Field(default_factory=SweepBlock)
    oracle: OracleBlock = Field(default_factory=OracleBlock)
    output: OutputBlock = Field(default_factory=OutputBlock)

    @model_validator(mode="after")
    def _knots_ordered(self):
        if self.knots is not None and not (0 < self.knots[0] < self.knots[1] < self.knots[2] < self.knots[3]):
            raise ValueError("knots must satisfy 0 < t1 < t2 < t3 < t4")
        return self


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        raw = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("the config must be a mapping")
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# subcommands; each returns (payload, rows, columns, ok)


def cmd_curvature(cfg: RunConfig):
    params = cfg.family.params()
    member = make_family(params)
    if params.kind == "hyperbolic" and params.eps > params.calibration[1]:
        log.info("eps=%g exceeds eps0=%g: k_eps = %g from the kappa branch", params.eps, params.calibration[1],
                 params.k_eps)
    grid = cfg.grid.points()
    if np.any(grid <= 0):
        raise ConfigError("grid points must be positive (the origin is not a smooth point of the family)")
    if params.kind == "hyperbolic" and np.any(np.tanh(grid) >= 1.0 - 1e-9):
        raise ConfigError("grid exceeds the unit ball")
    k_cf, s_cf, rev_cf = member.closed_forms(grid)
    rows = []
    worst = 0.0
    tol = cfg.tolerances
    lam = params.lam
    if params.kind == "flat":
        k_cap, s_cap = 0.0, 0.0
    else:
        k_cap, s_cap = -params.kappa ** 2, (params.n - 1) * params.h
    bounds_ok = True
    for i, s in enumerate(grid):
        x = member.point_at(float(s))
        k = float(flag_curvature_projective(member.metric, x, x))
        sb = float(reduced_s_curvature(member.metric, member.density, x, x))
        rev = float(reversibility(member.metric, x, x))
        deltas = [abs(a - b) / max(abs(b), 1e-300) for a, b in ((k, k_cf[i]), (sb, s_cf[i]), (rev, rev_cf[i]))]
        worst = max(worst, *deltas)
        holds = bool(k_cf[i] <= k_cap + tol.bound and s_cf[i] <= s_cap + tol.bound and rev_cf[i] <= lam + tol.bound)
        bounds_ok &= holds
        rows.append({
            member.profiles.coord: float(s),
            "K": float(k_cf[i]),
            "S_bar": float(s_cf[i]),
            "rev": float(rev_cf[i]),
            "h_eps": float(member.profiles.h_eps(s)),
            "K_engine": k,
            "S_bar_engine": sb,
            "rev_engine": rev,
            "delta_K": deltas[0],
            "delta_S_bar": deltas[1],
            "delta_rev": deltas[2],
            "bounds_hold": holds,
        })
    ok = bounds_ok and worst < tol.oracle
    payload = {
        "family": cfg.family.model_dump(),
        "k_eps": params.k_eps if params.kind == "hyperbolic" else None,
        "bounds_hold": bounds_ok,
        "max_oracle_delta": worst,
        "rows": rows,
    }
    return payload, rows, list(rows[0].keys()), ok


def cmd_riccati(cfg: RunConfig):
    pair = cfg.pair.build()
    grid = cfg.grid.points()
    res = np.atleast_1d(riccati_residual(pair, grid))
    v = LimitFunction(pair, t_ref=cfg.pair.t_ref, log_substitution=cfg.quadrature.log_substitution)
    log_v = np.atleast_1d(v.log_v(grid))
    closed = pair.params.get("log_v_closed")
    rows = []
    for i, t in enumerate(grid):
        row = {"t": float(t), "residual": float(res[i]), "log_v": float(log_v[i])}
        if closed is not None:
            row["log_v_closed"] = float(closed(float(t), cfg.pair.t_ref))
        rows.append(row)
    max_res = float(np.max(np.abs(res)))
    payload = {"pair": cfg.pair.model_dump(), "max_abs_residual": max_res, "rows": rows}
    log.info("max |residual| = %.3e", max_res)
    return payload, rows, list(rows[0].keys()), max_res <= cfg.tolerances.residual


def cmd_quotient(cfg: RunConfig):
    if cfg.knots is None:
        raise ConfigError("the quotient subcommand needs knots: [t1, t2, t3, t4]")
    member = make_family(cfg.family.params())
    pair = cfg.pair.build()
    v = LimitFunction(pair, t_ref=cfg.pair.t_ref, log_substitution=cfg.quadrature.log_substitution)
    trunc = make_truncation(v, *cfg.knots)
    br = hardy_quotient_radial(member, pair, trunc, cfg.quadrature.spec())
    payload = {"family": cfg.family.model_dump(), "pair": cfg.pair.model_dump(), "breakdown": br.to_dict()}
    ok = br.Q >= 1.0 - cfg.tolerances.quotient
    if br.upper_bound is not None:
        ok &= br.Q <= br.upper_bound + cfg.tolerances.quotient
    if cfg.montecarlo is not None:
        seed = cfg.montecarlo.seed if cfg.montecarlo.seed is not None else cfg.seed
        mc = hardy_quotient_montecarlo(member, pair, trunc, cfg.montecarlo.samples, seed)
        z = abs(mc.Q - br.Q) / mc.std_error if mc.std_error > 0 else math.inf
        payload["montecarlo"] = {"Q": mc.Q, "std_error": mc.std_error, "samples": mc.samples, "seed": mc.seed,
                                 "z_score": z}
        ok &= z < 3.0
    row = {k: v for k, v in br.to_dict().items() if not isinstance(v, dict)}
    return payload, [row], list(row.keys()), bool(ok)


SWEEP_COLUMNS = ["delta", "eps", "k_eps", "knots", "Q", "Q_minus_1", "l0", "l1", "l2", "upper_bound",
                 "bound_holds", "quad_rel_error", "skipped"]


def compare_baseline(report: dict, baseline_path, tol: float):
    """Largest relative deviation of Q from a stored baseline, matched by delta."""
    base = load_baseline(baseline_path)
    stored = {round(r["delta"], 9): r["Q"] for r in base["rows"] if r.get("Q") is not None}
    worst = 0.0
    for r in report["rows"]:
        key = round(r["delta"], 9)
        if key in stored and r["Q"] is not None:
            worst = max(worst, abs(r["Q"] - stored[key]) / abs(stored[key]))
    return worst, worst <= tol


def load_baseline(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def cmd_sweep(cfg: RunConfig):
    scfg = cfg.sweep.build(cfg.quadrature.spec(), cfg.tolerances.quotient)
    report = run_sweep(scfg)
    payload = report.to_dict()
    ok = report.above_one and report.monotone_decreasing and report.bound_chain_holds
    if cfg.sweep.baseline:
        worst, same = compare_baseline(payload, cfg.sweep.baseline, cfg.tolerances.baseline)
        payload["baseline_max_rel_deviation"] = worst
        ok &= same
    rows = [r.to_dict() for r in report.rows]
    return payload, rows, SWEEP_COLUMNS, ok


def cmd_oracle(cfg: RunConfig):
    """Run both preset sweeps once and store them as the pre-registered baselines."""
    out_dir = Path(cfg.oracle.out_dir)
    quad = cfg.quadrature.spec()
    written = {}
    ok = True
    for name, block in (("hardy", cfg.oracle.hardy), ("mckean", cfg.oracle.mckean)):
        report = run_sweep(block.build(quad, cfg.tolerances.quotient))
        data = {"label": f"oracle baseline ({name} preset)", "version": __version__}
        data.update(report.to_dict())
        path = write_atomic(out_dir / f"{name}.json", dumps(data))
        written[name] = str(path)
        ok &= report.above_one
        log.info("wrote %s", path)
    return {"baselines": written}, [{"name": k, "path": v} for k, v in written.items()], ["name", "path"], ok


COMMANDS = {
    "curvature": cmd_curvature,
    "riccati": cmd_riccati,
    "quotient": cmd_quotient,
    "sweep": cmd_sweep,
    "oracle": cmd_oracle,
}


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="finsler-hardy", description=__doc__.split("\n\n")[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="YAML configuration file")
    ap.add_argument("--out", help="output path (default: stdout)")
    ap.add_argument("--format", choices=("json", "csv"), help="output format (default: json)")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if cfg.subcommand is not None and cfg.subcommand != args.subcommand:
            raise ConfigError(f"config is for {cfg.subcommand!r}, not {args.subcommand!r}")
        if args.seed is not None:
            cfg = cfg.model_copy(update={"seed": args.seed})
        fmt = args.format or cfg.output.format
        out = args.out or cfg.output.path
        payload, rows, columns, ok = COMMANDS[args.subcommand](cfg)
    except (ConfigError, ParameterError, PairError, SweepError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, ConvergenceError, MetricError, EvaluationError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    payload = {"subcommand": args.subcommand, "seed": cfg.seed, "ok": ok, **payload}
    text = dumps(payload) if fmt == "json" else csv_text(rows, columns)
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    return EXIT_OK if ok else EXIT_VERDICT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
