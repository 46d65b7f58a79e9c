"""
Simultaneous link-level inference with a threshold chosen by estimated false discovery proportion.
"""

from __future__ import annotations

import logging
import math
from typing import Optional

import numpy as np
from attrs import field

from ._typedattr import definenumpy
from .errors import NetdiffInputError
from .stats_core import normal_sf

logger = logging.getLogger(__name__)


@definenumpy(True)
class MultipleTestResult:
    """
    Outcome of a link-level procedure.

    For the baseline procedure threshold is the cutoff on |T| and estimated_fdp is set.
    For the enhanced procedure threshold is the cutoff on the adjusted p-values and the winning
    partition is recorded in lambdas, group_sizes, alt_proportions and weights (one entry per group).
    """

    method: str
    alpha: float
    rejected: np.ndarray = field(repr=lambda a: f"array({len(a)} links)")
    threshold: float
    estimated_fdp: Optional[float] = None
    lambdas: Optional[np.ndarray] = None
    group_sizes: Optional[np.ndarray] = None
    alt_proportions: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    adjusted_pvalues: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_rejections(self) -> int:
        return len(self.rejected)

    def rejected_mask(self, q: int) -> np.ndarray:
        mask = np.zeros(q, dtype=bool)
        mask[self.rejected] = True
        return mask


def search_bound(q: int) -> float:
    """Upper end sqrt(2 log q) of the threshold search."""
    return math.sqrt(2.0 * math.log(q))


def estimate_fdp(h: float, t, q: Optional[int] = None) -> float:
    """FDP(h) = 2 q (1 - Phi(h)) / max(R(h), 1) with R(h) = #{k : |T_k| >= h}."""
    if h < 0:
        raise NetdiffInputError(f"Threshold must be nonnegative, got {h}")
    abs_t = np.abs(np.asarray(t, dtype=np.float64))
    if q is None:
        q = len(abs_t)
    n_rejected = int(np.count_nonzero(abs_t >= h))
    return float(2.0 * q * normal_sf(h) / max(n_rejected, 1))


def threshold_search(t, alpha: float, q: Optional[int] = None) -> float:
    """
    Smallest observed |T_k| in [0, sqrt(2 log q)] whose estimated FDP is at most alpha,
    or sqrt(2 log q) if there is none.

    The number of rejections is constant between consecutive observed |T| values while the
    numerator decreases, so this yields the same rejections as the infimum over the interval.
    """
    if not 0.0 < alpha < 1.0:
        raise NetdiffInputError(f"alpha must be in (0, 1), got {alpha}")
    abs_t = np.sort(np.abs(np.asarray(t, dtype=np.float64)))
    if q is None:
        q = len(abs_t)
    if q < 1:
        raise NetdiffInputError("Cannot search a threshold over zero links")
    bound = search_bound(q)
    candidates = np.unique(abs_t[abs_t <= bound])
    if len(candidates) == 0:
        return bound
    n_rejected = len(abs_t) - np.searchsorted(abs_t, candidates, side="left")
    fdp = 2.0 * q * normal_sf(candidates) / np.maximum(n_rejected, 1)
    qualified = np.flatnonzero(fdp <= alpha)
    if len(qualified) == 0:
        return bound
    return float(candidates[qualified[0]])


def run_baseline_test(t, alpha: float = 0.05, q: Optional[int] = None) -> MultipleTestResult:
    t = np.asarray(t, dtype=np.float64)
    if q is None:
        q = len(t)
    h = threshold_search(t, alpha, q)
    rejected = np.flatnonzero(np.abs(t) >= h)
    fdp = estimate_fdp(h, t, q)
    logger.debug(f"Baseline: threshold {h:.4f}, {len(rejected)} rejections, FDP estimate {fdp:.4g}")
    return MultipleTestResult(
        method="baseline", alpha=alpha, rejected=rejected, threshold=h, estimated_fdp=fdp
    )
