"""Push-DIGing over time-varying directed graphs, with rate certification."""

from .certify import certify, evaluate_gains, lambda_norm, small_gain_bound
from .engine import StepSizes, run_dgd_baseline, run_push_diging, run_push_sum_baseline
from .estimators import DGD, PushDIGing, PushSum, RateCertifier
from .graphs import Digraph, GraphSequence, make_periodic_partition, make_random_sequence, make_ring
from .harness import bundled_config, load_config, run_experiment
from .mixing import PushSumSchedule, build_mixing_matrix, consensus_constants
from .objectives import make_quadratic_suite, make_sensor_suite

__version__ = "0.1.0"

__all__ = [
    "DGD", "Digraph", "GraphSequence", "PushDIGing", "PushSum", "PushSumSchedule", "RateCertifier",
    "StepSizes", "build_mixing_matrix", "bundled_config", "certify", "consensus_constants",
    "evaluate_gains", "lambda_norm", "load_config", "make_periodic_partition", "make_quadratic_suite",
    "make_random_sequence", "make_ring", "make_sensor_suite", "run_dgd_baseline", "run_experiment",
    "run_push_diging", "run_push_sum_baseline", "small_gain_bound",
]
