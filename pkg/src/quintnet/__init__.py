"""ReLU networks with weights in {0, +-1/2, +-1, 2}: exact builders,
smooth-function approximation and error/complexity analysis."""

from __future__ import annotations

from .dyadic import Dyadic, InexactConversionError
from .netcore import (AlphabetError, NetStats, NetworkError, QuintNet, QuintWeight,
                      ShapeError, chain, compose, eval_exact, eval_exact_batch, eval_float,
                      identity_net, load, parallel, save, stats, validate)
from .atoms import build_mon, build_mult, build_mult_r, build_nm, multi_indices, r_sum, tee
from .constants import ConstantPlan, build_const_net
from .targets import SmoothTarget, make_target
from .taylor import ApproxConfig, PreconditionError, assemble, make_config, p_tilde_eval
from .analysis import (BoundReport, SweepRecord, count_networks, oracle_inequality,
                       regression_simulate, sup_error, thm1_bounds, thm2_bounds)

__version__ = "0.1.0"

__all__ = [
    "Dyadic",
    "InexactConversionError",
    "AlphabetError",
    "NetStats",
    "NetworkError",
    "QuintNet",
    "QuintWeight",
    "ShapeError",
    "chain",
    "compose",
    "eval_exact",
    "eval_exact_batch",
    "eval_float",
    "identity_net",
    "load",
    "parallel",
    "save",
    "stats",
    "validate",
    "build_mon",
    "build_mult",
    "build_mult_r",
    "build_nm",
    "multi_indices",
    "r_sum",
    "tee",
    "ConstantPlan",
    "build_const_net",
    "SmoothTarget",
    "make_target",
    "ApproxConfig",
    "PreconditionError",
    "assemble",
    "make_config",
    "p_tilde_eval",
    "BoundReport",
    "SweepRecord",
    "count_networks",
    "oracle_inequality",
    "regression_simulate",
    "sup_error",
    "thm1_bounds",
    "thm2_bounds",
]
