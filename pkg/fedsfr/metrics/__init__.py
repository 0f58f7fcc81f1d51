# SPDX-License-Identifier: Apache-2.0

from fedsfr.metrics.evaluation import dataset_loss_and_grad, evaluate, grad_norm_estimate
from fedsfr.metrics.log import (
    COLUMNS,
    MetricsLog,
    RoundMetrics,
    improvement_ratio,
    lemma2_margin,
    read_csv,
    summarize,
    write_csv,
)
from fedsfr.metrics.quality import cosine_similarity, epsilon_hat, psnr, psnr_from_mse
from fedsfr.metrics.theory import ConvergenceBound, ConvergenceConstants, convergence_bound
from fedsfr.metrics.trends import early_threshold, early_violations, mean_curve, psnr_curve, rounds_to_reach

__all__ = [
    "COLUMNS",
    "ConvergenceBound",
    "ConvergenceConstants",
    "MetricsLog",
    "RoundMetrics",
    "convergence_bound",
    "cosine_similarity",
    "dataset_loss_and_grad",
    "early_threshold",
    "early_violations",
    "epsilon_hat",
    "evaluate",
    "grad_norm_estimate",
    "improvement_ratio",
    "lemma2_margin",
    "mean_curve",
    "psnr",
    "psnr_curve",
    "psnr_from_mse",
    "read_csv",
    "rounds_to_reach",
    "summarize",
    "write_csv",
]
