"""Python bindings for the reap C++ library."""

import json

from ._reap import (
    ReapError,
    Session,
    chebyshev_center,
    cost,
    gen_truth_lqr,
    gen_truth_random,
    generate_grad_logistic,
    max_over_confidence,
    mean_rank,
    pair_matrix,
    tolerant_center,
    wilcoxon_one_sided,
)
from ._reap import run_experiment_json as _run_experiment_json

__all__ = [
    "ReapError",
    "Session",
    "chebyshev_center",
    "cost",
    "gen_truth_lqr",
    "gen_truth_random",
    "generate_grad_logistic",
    "max_over_confidence",
    "mean_rank",
    "pair_matrix",
    "run_experiment",
    "tolerant_center",
    "wilcoxon_one_sided",
]


def run_experiment(config):
    """Run an experiment config (dict) and return the report as a dict.

    The per-trial CSV is under the "raw_csv" key.
    """
    return json.loads(_run_experiment_json(json.dumps(config)))
