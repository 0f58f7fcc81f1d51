# SPDX-License-Identifier: Apache-2.0

"""Curve comparisons behind the desk-scale trend checks"""

import math
from typing import Optional, Sequence

import numpy as np

from fedsfr.exceptions import DegenerateInputError
from fedsfr.metrics.log import MetricsLog


def psnr_curve(log: MetricsLog, rounds: int) -> np.ndarray:
    """Post-FR test PSNR per round; rounds a failed run never reached count as -inf"""
    curve = np.full(rounds, -np.inf)
    values = log.column("test_psnr_post_fr")[:rounds]
    curve[: len(values)] = values
    return curve


def mean_curve(curves: Sequence[np.ndarray]) -> np.ndarray:
    if not curves:
        raise DegenerateInputError("Cannot average zero curves")
    return np.mean(np.stack(curves), axis=0)


def rounds_to_reach(curve: np.ndarray, threshold: float) -> Optional[int]:
    """First round whose PSNR is at least `threshold`, or None"""
    hits = np.flatnonzero(curve >= threshold)
    return int(hits[0]) if hits.size else None


def early_violations(leader: np.ndarray, follower: np.ndarray, tolerance_db: float) -> Optional[float]:
    """Fraction of first-half rounds where `leader` falls below `follower`

    Returns None when any shortfall reaches `tolerance_db`.
    """
    half = max(len(leader) // 2, 1)
    shortfall = follower[:half] - leader[:half]
    shortfall = np.where(np.isnan(shortfall), np.inf, shortfall)
    if np.any(shortfall >= tolerance_db):
        return None
    return float(np.count_nonzero(shortfall > 0.0)) / half


def early_threshold(fast: np.ndarray, slow: np.ndarray, fraction: float = 0.5) -> float:
    """PSNR `fraction` of the way from the shared start to the lower of the two final values"""
    start = max(fast[0], slow[0])
    final = min(fast[-1], slow[-1])
    if not (math.isfinite(start) and math.isfinite(final)):
        return math.inf
    return float(start + fraction * (final - start))
