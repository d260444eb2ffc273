"""Extremes of order-statistics processes of stationary Gaussian processes.

Simulation, tail and Pickands-constant estimation, the ``f_p`` threshold
family with its integral test and crossing trackers, and a checker for the
order-statistics normal-comparison inequality.
"""

from .berman import ComparisonInstance, berman_bound, check_instance, orderstat_orthant
from .correlation import (CorrelationModel, DomainError, cauchy, evaluate, load_table,
                          powered_exponential, tabulated, validate_decay, validate_local)
from .extremes import (PickandsEstimate, TailEstimate, classical_pickands, pickands_constant,
                       pickands_estimate, pickands_extrapolate, tail_asymptotic)
from .gaussim import (EmbeddingError, GridSpec, PathEnsemble, circulant_embed, fbm_blocks,
                      sample_fbm, sample_stationary, stationary_blocks)
from .lil import (LilConfig, ThresholdFamily, classify_dichotomy, f_p, h_p, integral_If,
                  lil_experiment, track_crossings)
from .orderstats import OrderStatPath, empirical_tail, order_statistic_path

__version__ = "0.1.0"

__all__ = [
    "ComparisonInstance", "CorrelationModel", "DomainError", "EmbeddingError", "GridSpec",
    "LilConfig", "OrderStatPath", "PathEnsemble", "PickandsEstimate", "TailEstimate",
    "ThresholdFamily", "berman_bound", "cauchy", "check_instance", "circulant_embed",
    "classical_pickands", "classify_dichotomy", "empirical_tail", "evaluate", "f_p", "fbm_blocks",
    "h_p", "integral_If", "lil_experiment", "load_table", "order_statistic_path",
    "orderstat_orthant", "pickands_constant", "pickands_estimate", "pickands_extrapolate",
    "powered_exponential", "sample_fbm", "sample_stationary", "stationary_blocks", "tabulated",
    "tail_asymptotic", "track_crossings", "validate_decay", "validate_local",
]
