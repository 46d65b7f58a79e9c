"""
Power enhanced link-level inference.

Links are split into K groups by the auxiliary statistic A, the proportion of alternatives is
estimated per group, the p-values are reweighted by the group odds and a Benjamini-Hochberg step-up
runs on the weighted p-values. All (K-1)-subsets of a grid of split points are scanned and the one
with the most rejections wins, ties going to the lexicographically smallest split points.
"""

from __future__ import annotations

import itertools
import logging
import math
from typing import Optional, Tuple

import numpy as np
from attrs import define, evolve, field, validators

from ._typedattr import definenumpy
from .errors import InvariantViolationError, NetdiffInputError
from .fdr_baseline import MultipleTestResult
from .stats_core import two_sided_pvalues

logger = logging.getLogger(__name__)

TARGET_SPACING = 0.1
_SCAN_BATCH_SIZE = 512


def _open_unit_interval(_instance, attribute, value):
    if not 0.0 < value < 1.0:
        raise NetdiffInputError(f"{attribute.name} must be in (0, 1), got {value}")


@define(frozen=True)
class GapConfig:
    """
    Settings of the enhanced procedure. c1, c2 and n_grid are derived from the data when None.
    """

    k_groups: int = field(default=3)
    c1: Optional[float] = None
    c2: Optional[float] = None
    n_grid: Optional[int] = field(default=None)
    epsilon: float = field(default=1e-5)
    storey_lambda: float = field(default=0.5, validator=_open_unit_interval)
    alpha: float = field(default=0.05, validator=_open_unit_interval)
    c_bound: float = field(default=16.0, validator=validators.gt(0))

    @k_groups.validator
    def _check_k_groups(self, _attribute, value):
        if value < 1:
            raise NetdiffInputError(f"k_groups must be at least 1, got {value}")

    @n_grid.validator
    def _check_n_grid(self, _attribute, value):
        if value is not None and value < 1:
            raise NetdiffInputError(f"n_grid must be at least 1, got {value}")

    @epsilon.validator
    def _check_epsilon(self, _attribute, value):
        if not 0.0 < value < 0.5:
            raise NetdiffInputError(f"epsilon must be in (0, 0.5), got {value}")

    def __attrs_post_init__(self):
        if self.c1 is not None and self.c2 is not None and self.c1 > self.c2:
            raise NetdiffInputError(f"Need c1 <= c2, got c1={self.c1}, c2={self.c2}")
        if self.k_groups >= 4:
            logger.debug(f"k_groups={self.k_groups} scans all {self.k_groups - 1}-subsets of the grid")


@definenumpy(True)
class Grid:
    points: np.ndarray
    spacing: float
    n_grid: int
    c1: float
    c2: float

    @property
    def degenerate(self) -> bool:
        return len(self.points) == 0


def build_grid(a, config: GapConfig) -> Grid:
    """
    Equally spaced split points j sqrt(log q) / N with ceil(c1 N) <= j <= floor(c2 N).

    Without explicit bounds, c1 sqrt(log q) and c2 sqrt(log q) are min(A) and max(A). Both multipliers
    are truncated to [-c_bound, c_bound]. If all A are identical the grid is empty.
    """
    a = np.asarray(a, dtype=np.float64)
    q = len(a)
    if q < 3:
        raise NetdiffInputError(f"The grid needs q >= 3 links, got q={q}")
    root = math.sqrt(math.log(q))
    n_grid = config.n_grid if config.n_grid is not None else max(1, round(root / TARGET_SPACING))
    spacing = root / n_grid
    a_min, a_max = float(a.min()), float(a.max())
    c1 = config.c1 if config.c1 is not None else a_min / root
    c2 = config.c2 if config.c2 is not None else a_max / root
    c1 = min(max(c1, -config.c_bound), config.c_bound)
    c2 = min(max(c2, -config.c_bound), config.c_bound)
    if config.c1 is None and config.c2 is None and a_min == a_max:
        logger.debug(f"All {q} auxiliary statistics equal {a_min}, grid is degenerate")
        return Grid(np.zeros(0, dtype=np.float64), spacing, n_grid, c1, c2)
    j = np.arange(math.ceil(c1 * n_grid), math.floor(c2 * n_grid) + 1)
    return Grid(j * spacing, spacing, n_grid, c1, c2)


def partition_groups(a, lambdas) -> np.ndarray:
    """
    Group label of every link: label k means lambdas[k-1] < A <= lambdas[k], with the outer
    bounds at -inf and +inf.
    """
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if np.any(np.diff(lambdas) <= 0):
        raise NetdiffInputError(f"Split points must be strictly increasing, got {lambdas}")
    return np.searchsorted(lambdas, np.asarray(a, dtype=np.float64), side="left")


def _storey_from_counts(n_above, sizes, storey_lambda: float, epsilon: float) -> np.ndarray:
    n_above = np.asarray(n_above, dtype=np.float64)
    sizes = np.asarray(sizes, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        pi_tilde = 1.0 - n_above / ((1.0 - storey_lambda) * sizes)
    pi_hat = np.clip(pi_tilde, epsilon, 1.0 - epsilon)
    return np.where(sizes > 0, pi_hat, epsilon)


def estimate_alt_proportion(pvalues, storey_lambda: float = 0.5, epsilon: float = 1e-5) -> float:
    """
    Proportion of alternatives in one group, 1 - #{p > lambda} / ((1 - lambda) q_k), clamped to
    [epsilon, 1 - epsilon]. An empty group gets epsilon.
    """
    pvalues = np.asarray(pvalues, dtype=np.float64)
    n_above = np.count_nonzero(pvalues > storey_lambda)
    return float(_storey_from_counts(n_above, len(pvalues), storey_lambda, epsilon))


def group_weights(sizes, alt_proportions) -> np.ndarray:
    """
    Per-group weights q pi_k / (1 - pi_k) / sum_k q_k pi_k / (1 - pi_k), so that
    sum_k q_k w_k = q. Works on the last axis, so batches of partitions can be passed.
    """
    sizes = np.asarray(sizes, dtype=np.float64)
    alt_proportions = np.asarray(alt_proportions, dtype=np.float64)
    odds = alt_proportions / (1.0 - alt_proportions)
    total = sizes.sum(axis=-1, keepdims=True)
    return total * odds / (sizes * odds).sum(axis=-1, keepdims=True)


@definenumpy(True)
class GroupPartition:
    lambdas: np.ndarray
    labels: np.ndarray = field(repr=False)
    sizes: np.ndarray
    alt_proportions: np.ndarray

    @property
    def k_groups(self) -> int:
        return len(self.sizes)

    @property
    def weights(self) -> np.ndarray:
        return group_weights(self.sizes, self.alt_proportions)

    @classmethod
    def create(
        cls, a, pvalues, lambdas, storey_lambda: float = 0.5, epsilon: float = 1e-5
    ) -> "GroupPartition":
        lambdas = np.asarray(lambdas, dtype=np.float64)
        pvalues = np.asarray(pvalues, dtype=np.float64)
        labels = partition_groups(a, lambdas)
        k_groups = len(lambdas) + 1
        sizes = np.bincount(labels, minlength=k_groups)
        n_above = np.bincount(labels, weights=pvalues > storey_lambda, minlength=k_groups)
        pi_hat = _storey_from_counts(n_above, sizes, storey_lambda, epsilon)
        return cls(lambdas, labels, sizes, pi_hat)


def compute_weights(partition: GroupPartition) -> np.ndarray:
    """Weight of every link, w_i = w_k for i in group k."""
    return partition.weights[partition.labels]


def adjust_pvalues(pvalues, weights) -> np.ndarray:
    """p / w capped at 1."""
    weights = np.asarray(weights, dtype=np.float64)
    if np.any(weights <= 0):
        raise NetdiffInputError("Weights must be positive")
    return np.minimum(np.asarray(pvalues, dtype=np.float64) / weights, 1.0)


def _bh_counts(sorted_pvalues: np.ndarray, alpha: float) -> np.ndarray:
    # sorted_pvalues has shape (..., q), returns the step-up count per row
    q = sorted_pvalues.shape[-1]
    critical = alpha * np.arange(1, q + 1) / q
    passed = sorted_pvalues <= critical
    last = q - np.argmax(passed[..., ::-1], axis=-1)
    return np.where(passed.any(axis=-1), last, 0)


def bh_procedure(pvalues, alpha: float) -> Tuple[int, np.ndarray]:
    """
    Benjamini-Hochberg step-up.

    Returns:
        tau = max{i : p_(i) <= alpha i / q} (0 if none) and the indices with p <= p_(tau)
    """
    if not 0.0 < alpha < 1.0:
        raise NetdiffInputError(f"alpha must be in (0, 1), got {alpha}")
    pvalues = np.asarray(pvalues, dtype=np.float64)
    sorted_pvalues = np.sort(pvalues)
    tau = int(_bh_counts(sorted_pvalues, alpha))
    if tau == 0:
        return 0, np.zeros(0, dtype=np.intp)
    return tau, np.flatnonzero(pvalues <= sorted_pvalues[tau - 1])


@definenumpy(True)
class CandidateScan:
    """Every distinct partition scanned, one row per candidate in scan order."""

    grid: Grid
    lambdas: np.ndarray = field(repr=False)
    sizes: np.ndarray = field(repr=False)
    alt_proportions: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    n_rejections: np.ndarray = field(repr=False)

    @property
    def n_candidates(self) -> int:
        return len(self.n_rejections)

    @property
    def best(self) -> int:
        return int(np.argmax(self.n_rejections))


def _distinct_candidates(sorted_a: np.ndarray, points: np.ndarray, n_split: int):
    if n_split == 0:
        return np.zeros((1, 0), dtype=np.float64), np.zeros((1, 0), dtype=np.intp)
    combos = np.array(list(itertools.combinations(range(len(points)), n_split)), dtype=np.intp)
    lambdas = points[combos]
    # number of links at or below each split point identifies the partition
    cuts = np.searchsorted(sorted_a, lambdas, side="right")
    _, first = np.unique(cuts, axis=0, return_index=True)
    first = np.sort(first)
    return lambdas[first], cuts[first]


def scan_candidates(pvalues, a, config: GapConfig, grid: Optional[Grid] = None) -> CandidateScan:
    """
    Evaluate the weighted BH rejection count for every distinct partition from the grid.

    A degenerate grid, or a grid with fewer than k_groups - 1 points, leaves the single
    one-group partition.
    """
    pvalues = np.asarray(pvalues, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    q = len(pvalues)
    if grid is None:
        grid = build_grid(a, config)
    n_split = config.k_groups - 1
    if n_split > len(grid.points):
        if n_split > 0:
            logger.debug(
                f"Grid has {len(grid.points)} points, fewer than the {n_split} split points "
                f"needed, falling back to a single group"
            )
        n_split = 0

    order = np.argsort(a, kind="stable")
    sorted_a = a[order]
    p_by_a = pvalues[order]
    lambdas, cuts = _distinct_candidates(sorted_a, grid.points, n_split)
    n_candidates = len(lambdas)
    above = np.concatenate([[0], np.cumsum(p_by_a > config.storey_lambda)])
    positions = np.arange(q)

    sizes = np.zeros((n_candidates, n_split + 1), dtype=np.int64)
    alt_proportions = np.zeros((n_candidates, n_split + 1), dtype=np.float64)
    weights = np.zeros((n_candidates, n_split + 1), dtype=np.float64)
    n_rejections = np.zeros(n_candidates, dtype=np.int64)
    for start in range(0, n_candidates, _SCAN_BATCH_SIZE):
        stop = min(start + _SCAN_BATCH_SIZE, n_candidates)
        batch = cuts[start:stop]
        n_batch = stop - start
        bounds = np.concatenate(
            [np.zeros((n_batch, 1), dtype=np.intp), batch, np.full((n_batch, 1), q)], axis=1
        )
        batch_sizes = np.diff(bounds, axis=1)
        batch_above = np.diff(above[bounds], axis=1)
        batch_pi = _storey_from_counts(
            batch_above, batch_sizes, config.storey_lambda, config.epsilon
        )
        batch_weights = group_weights(batch_sizes, batch_pi)
        labels = (positions[None, :, None] >= batch[:, None, :]).sum(axis=-1)
        link_weights = np.take_along_axis(batch_weights, labels, axis=1)
        adjusted = np.minimum(p_by_a[None, :] / link_weights, 1.0)
        n_rejections[start:stop] = _bh_counts(np.sort(adjusted, axis=1), config.alpha)
        sizes[start:stop] = batch_sizes
        alt_proportions[start:stop] = batch_pi
        weights[start:stop] = batch_weights

    logger.debug(
        f"Scanned {n_candidates} distinct partitions into {n_split + 1} groups "
        f"from {len(grid.points)} grid points"
    )
    return CandidateScan(grid, lambdas, sizes, alt_proportions, weights, n_rejections)


def run_enhanced_test(
    t, a, alpha: Optional[float] = None, config: Optional[GapConfig] = None
) -> MultipleTestResult:
    """
    Args:
        t: test statistics of all links
        a: auxiliary statistics of all links
        alpha: level, overrides config.alpha if given
        config: procedure settings

    Returns:
        the rejections of the weighted BH procedure under the partition with the most rejections
    """
    if config is None:
        config = GapConfig()
    if alpha is not None:
        config = evolve(config, alpha=alpha)
    t = np.asarray(t, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if t.shape != a.shape:
        raise NetdiffInputError(f"Got {len(t)} test statistics but {len(a)} auxiliary statistics")
    pvalues = two_sided_pvalues(t)
    scan = scan_candidates(pvalues, a, config)
    best = scan.best

    partition = GroupPartition.create(
        a, pvalues, scan.lambdas[best], config.storey_lambda, config.epsilon
    )
    adjusted = adjust_pvalues(pvalues, compute_weights(partition))
    tau, rejected = bh_procedure(adjusted, config.alpha)
    if tau != scan.n_rejections[best] or len(rejected) != tau:
        raise InvariantViolationError(
            f"Weighted BH on the winning partition {scan.lambdas[best].tolist()} rejected {tau} "
            f"links ({len(rejected)} indices) but the scan counted {scan.n_rejections[best]}"
        )
    q = len(t)
    cutoff = config.alpha * tau / q if tau > 0 else 0.0
    logger.debug(
        f"Enhanced: split points {partition.lambdas.tolist()}, group sizes "
        f"{partition.sizes.tolist()}, {tau} rejections"
    )
    return MultipleTestResult(
        method="enhanced",
        alpha=config.alpha,
        rejected=rejected,
        threshold=cutoff,
        lambdas=partition.lambdas,
        group_sizes=partition.sizes,
        alt_proportions=partition.alt_proportions,
        weights=partition.weights,
        adjusted_pvalues=adjusted,
    )
