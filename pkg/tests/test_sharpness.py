import math

import numpy as np
import pytest

from finsler_hardy.families import make_hyperbolic_family
from finsler_hardy.riccati import LimitFunction, preset_hardy, preset_mckean
from finsler_hardy.sharpness import (SweepConfig, SweepError, choose_eps_rule, compute_l0, compute_l1, compute_l2,
                                     knots_for, resolve_knot_rule, run_sweep)


def test_l0_first_ramp_term_is_constant():
    # left term alone: v(t2)^p I(w; t1, t2) / (t2 - t1)^p = (2^3 - 1) / (3 * 2^1)
    pair = preset_hardy(3, 2.0, 0.0)
    v = LimitFunction(pair)
    for delta in (10.0, 1e3):
        # a right ramp of vanishing weight isolates the left term's numerator through the difference
        both = compute_l0(pair, v, (delta / 2, delta, delta ** 2, 2 * delta ** 2), "flat", 3)
        bulk = 0.25 * math.log(delta)
        right = (1 / delta ** 2) * (7 / 3) * delta ** 6 / delta ** 4
        assert (both * bulk - right) == pytest.approx(7.0 / 6.0, rel=1e-9)


def test_l0_hardy_decays_like_inverse_log():
    pair = preset_hardy(3, 2.0, 0.0)
    v = LimitFunction(pair)
    vals = [compute_l0(pair, v, (d / 2, d, d * d, 2 * d * d), "flat", 3) * math.log(d) for d in (10.0, 1e3, 1e6)]
    np.testing.assert_allclose(vals, vals[0], rtol=1e-9)


def test_l1_presets_and_scaling():
    knots = (1.0, 2.0, 50.0, 60.0)
    assert compute_l1(preset_hardy(3, 2.0, 0.0), knots) == pytest.approx(1.0, rel=1e-14)
    assert compute_l1(preset_mckean(2, 2.0, 1.0, 0.0), knots) == pytest.approx(1.0, rel=1e-14)
    assert compute_l1(preset_hardy(3, 2.0, 0.0).scaled_W(0.5), knots) == pytest.approx(2.0, rel=1e-14)


def test_l1_finds_interior_maximum():
    base = preset_hardy(3, 2.0, 0.0)
    from finsler_hardy.riccati import RiccatiPair

    bump = RiccatiPair(2.0, base.w, base.L, lambda t: base.W(t) / (1 + 0.5 * np.exp(-(t - 7.3) ** 2)), base.G)
    assert compute_l1(bump, (1.0, 2.0, 20.0, 30.0)) == pytest.approx(1.5, rel=1e-10)


def test_l2_limits():
    lam = 2.0
    vals = []
    for delta in (10.0, 100.0, 1e4):
        member = make_hyperbolic_family(2, lam, 1.0, 0.0, 1.0 / delta)
        vals.append(compute_l2(member, 2 * delta))
    assert vals[-1] == pytest.approx(1.0 / lam, rel=1e-8)
    assert vals[0] > vals[1] > vals[2]
    member = make_hyperbolic_family(2, lam, 1.0, 0.0, 0.1)
    assert compute_l2(member, 1e-12) == pytest.approx(1.0, rel=1e-9)


def test_knot_rules():
    assert knots_for(resolve_knot_rule("hardy"), 10.0) == (5.0, 10.0, 100.0, 200.0)
    assert knots_for(resolve_knot_rule("mckean"), 10.0) == (10.0, 20.0, 30.0, 40.0)
    assert knots_for(resolve_knot_rule([[1, 1], [2, 1], [3, 1], [3, 1, 1]]), 10.0) == (10.0, 20.0, 30.0, 31.0)
    with pytest.raises(SweepError):
        resolve_knot_rule([[1, 1], [2, 1]])
    with pytest.raises(SweepError):
        resolve_knot_rule("nope")


def test_eps_rules():
    shrinking = resolve_knot_rule([[0.5, -1], [1, -1], [1, 0], [2, 0]])
    assert choose_eps_rule(shrinking, [10.0, 100.0]) == "t2_squared"
    assert choose_eps_rule(resolve_knot_rule("hardy"), [10.0, 100.0]) == "inverse_delta"
    cfg = SweepConfig(preset="hardy", deltas=[10.0, 100.0], knot_rule=[[0.5, -1], [1, -1], [1, 0], [2, 0]])
    rep = run_sweep(cfg)
    assert rep.eps_rule == "t2_squared"
    assert [r.eps for r in rep.rows] == pytest.approx([1e-2, 1e-4], rel=1e-15)


def test_config_validation():
    with pytest.raises(SweepError):
        SweepConfig(preset="other")
    with pytest.raises(SweepError):
        SweepConfig(deltas=[10.0, 5.0])
    with pytest.raises(SweepError):
        SweepConfig(W_scale=0.0)
    assert SweepConfig(preset="mckean").deltas == [10.0, 20.0, 40.0, 80.0, 160.0]
    assert len(SweepConfig().deltas) == 7


def test_hardy_sweep_verdicts():
    rep = run_sweep(SweepConfig(preset="hardy", n=3, lam=2.0, deltas=[10.0, 100.0, 1e3, 1e4]))
    qs = [r.Q for r in rep.rows]
    assert rep.above_one and rep.monotone_decreasing and rep.bound_chain_holds
    assert all(q > 1 for q in qs)
    # Q - 1 ~ A / log(delta): the scaled gap changes slowly
    scaled = [(r.Q - 1) * math.log(r.delta) for r in rep.rows]
    assert max(scaled[1:]) / min(scaled[1:]) < 1.25
    assert all(r.l1 == pytest.approx(1.0, rel=1e-14) for r in rep.rows)


def test_rows_do_not_abort_the_sweep():
    # eps = 1 is above eps_tilde for the McKean member, so the first row is skipped
    rep = run_sweep(SweepConfig(preset="mckean", n=2, kappa=1.0, deltas=[1.0, 10.0]))
    assert rep.rows[0].Q is None and "eps_tilde" in rep.rows[0].skipped
    assert rep.rows[1].Q is not None and rep.rows[1].k_eps >= 1.0


def test_parallel_rows_match_serial():
    cfg = dict(preset="hardy", deltas=[10.0, 100.0, 1000.0])
    serial = run_sweep(SweepConfig(**cfg)).to_dict()
    parallel = run_sweep(SweepConfig(**cfg, workers=2)).to_dict()
    serial["config"].pop("workers")
    parallel["config"].pop("workers")
    assert serial == parallel
