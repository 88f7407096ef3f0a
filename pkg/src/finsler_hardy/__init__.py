"""Randers metrics, curvature of radial model families and sharpness sweeps for Hardy-type inequalities."""

__version__ = "0.1.0"

from .families import FamilyParams, make_family, make_flat_family, make_hyperbolic_family  # noqa: E402
from .finsler import RandersMetric, eval_F, eval_F_dual  # noqa: E402
from .hardy_eval import hardy_quotient_montecarlo, hardy_quotient_radial  # noqa: E402
from .riccati import LimitFunction, RiccatiPair, make_truncation, preset_hardy, preset_mckean  # noqa: E402
from .sharpness import SweepConfig, run_sweep  # noqa: E402

__all__ = [
    "FamilyParams",
    "LimitFunction",
    "RandersMetric",
    "RiccatiPair",
    "SweepConfig",
    "eval_F",
    "eval_F_dual",
    "hardy_quotient_montecarlo",
    "hardy_quotient_radial",
    "make_family",
    "make_flat_family",
    "make_hyperbolic_family",
    "make_truncation",
    "preset_hardy",
    "preset_mckean",
    "run_sweep",
]
