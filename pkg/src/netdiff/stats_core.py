"""
Per-link two-sample statistics.

All functions work on whole link vectors of length q; the statistics of one link never depend on
another link.
"""

from __future__ import annotations

import logging
import math
from typing import Tuple

import numpy as np
from attrs import field
from scipy.special import erfc

from ._typedattr import definenumpy
from .errors import InvariantViolationError, NetdiffInputError
from .netdata import LinkIndexMap, NetworkSampleStack

logger = logging.getLogger(__name__)

_SQRT2 = math.sqrt(2.0)


@definenumpy(True)
class LinkSummaries:
    """Group means and variances (divisor n_d) per link."""

    mean1: np.ndarray
    mean2: np.ndarray
    w: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    n1: int
    n2: int

    @classmethod
    def from_moments(cls, mean1, mean2, v1, v2, n1: int, n2: int) -> "LinkSummaries":
        mean1 = np.atleast_1d(np.asarray(mean1, dtype=np.float64))
        mean2 = np.atleast_1d(np.asarray(mean2, dtype=np.float64))
        return cls(
            mean1,
            mean2,
            mean1 - mean2,
            np.atleast_1d(np.asarray(v1, dtype=np.float64)),
            np.atleast_1d(np.asarray(v2, dtype=np.float64)),
            n1,
            n2,
        )

    @property
    def q(self) -> int:
        return len(self.w)

    @property
    def degenerate(self) -> np.ndarray:
        return (self.v1 == 0) & (self.v2 == 0)


@definenumpy(True)
class LinkStatistics:
    """
    Everything computed per link. kappa_hat is NaN and a is 0 where the auxiliary statistic is
    undefined (aux_degenerate), t is 0 and pvalue 1 on degenerate links.
    """

    summaries: LinkSummaries = field(repr=False)
    t: np.ndarray = field(repr=False)
    kappa_hat: np.ndarray = field(repr=False)
    a: np.ndarray = field(repr=False)
    pvalue: np.ndarray = field(repr=False)
    degenerate: np.ndarray = field(repr=False)
    aux_degenerate: np.ndarray = field(repr=False)

    @property
    def q(self) -> int:
        return self.summaries.q

    @property
    def w(self) -> np.ndarray:
        return self.summaries.w

    @property
    def v1(self) -> np.ndarray:
        return self.summaries.v1

    @property
    def v2(self) -> np.ndarray:
        return self.summaries.v2


def _group_moments(links: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    # constant links get their exact value and zero variance, independent of summation rounding
    constant = np.all(links == links[0], axis=0)
    mean = links.mean(axis=0)
    var = links.var(axis=0)
    mean[constant] = links[0, constant]
    var[constant] = 0.0
    return mean, var


def link_summaries(stack1: NetworkSampleStack, stack2: NetworkSampleStack) -> LinkSummaries:
    """
    Mean difference W and variance estimates V1, V2 of every link.
    Variances use the divisor n_d, not n_d - 1.
    """
    if stack1.p != stack2.p:
        raise NetdiffInputError(
            f"Groups have different node counts: p={stack1.p} for group {stack1.group_id}, "
            f"p={stack2.p} for group {stack2.group_id}"
        )
    mean1, v1 = _group_moments(stack1.links())
    mean2, v2 = _group_moments(stack2.links())
    return LinkSummaries.from_moments(mean1, mean2, v1, v2, stack1.n, stack2.n)


def test_statistics(summaries: LinkSummaries) -> np.ndarray:
    """
    T = W / sqrt(V1 / n1 + V2 / n2), with T = 0 on degenerate links (V1 = V2 = 0).
    """
    degenerate = summaries.degenerate
    inconsistent = np.flatnonzero(degenerate & (summaries.w != 0))
    if len(inconsistent) > 0:
        index_map = LinkIndexMap((1 + math.isqrt(1 + 8 * summaries.q)) // 2)
        pairs = ", ".join(str(index_map.unflatten(int(k))) for k in inconsistent[:10])
        raise InvariantViolationError(
            f"Groups are perfectly separated at link (i, j) = {pairs}: both groups are constant "
            f"there with different values ({len(inconsistent)} links in total)"
        )
    t = np.zeros(summaries.q, dtype=np.float64)
    ok = ~degenerate
    scale = summaries.v1[ok] / summaries.n1 + summaries.v2[ok] / summaries.n2
    t[ok] = summaries.w[ok] / np.sqrt(scale)
    return t


def auxiliary_statistics(summaries: LinkSummaries) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Variance-ratio weight and auxiliary statistic, asymptotically independent of T under the null:

        kappa_hat = n2 V1 / (n1 V2)
        A = (mean1 + kappa_hat mean2) / sqrt(V1 / n1 + kappa_hat^2 V2 / n2)

    Returns:
        kappa_hat, a and the aux_degenerate mask (V1 = 0 or V2 = 0, where kappa_hat is NaN and A is 0)
    """
    v1, v2 = summaries.v1, summaries.v2
    aux_degenerate = (v1 == 0) | (v2 == 0)
    ok = ~aux_degenerate
    kappa_hat = np.full(summaries.q, np.nan, dtype=np.float64)
    a = np.zeros(summaries.q, dtype=np.float64)
    kappa = (summaries.n2 * v1[ok]) / (summaries.n1 * v2[ok])
    kappa_hat[ok] = kappa
    numerator = summaries.mean1[ok] + kappa * summaries.mean2[ok]
    a[ok] = numerator / np.sqrt(v1[ok] / summaries.n1 + kappa**2 * v2[ok] / summaries.n2)
    return kappa_hat, a, aux_degenerate


def normal_sf(x):
    """Upper tail 1 - Phi(x) of the standard normal, accurate far into the tail."""
    return 0.5 * erfc(np.asarray(x, dtype=np.float64) / _SQRT2)


def two_sided_pvalues(t) -> np.ndarray:
    """p = 2 (1 - Phi(|t|)), evaluated as erfc(|t| / sqrt(2))."""
    return np.clip(erfc(np.abs(np.asarray(t, dtype=np.float64)) / _SQRT2), 0.0, 1.0)


def compute_link_statistics(
    stack1: NetworkSampleStack, stack2: NetworkSampleStack
) -> LinkStatistics:
    summaries = link_summaries(stack1, stack2)
    t = test_statistics(summaries)
    kappa_hat, a, aux_degenerate = auxiliary_statistics(summaries)
    degenerate = summaries.degenerate
    n_degenerate, n_aux = int(degenerate.sum()), int(aux_degenerate.sum())
    if n_degenerate > 0 or n_aux > 0:
        logger.debug(
            f"{n_degenerate} of {summaries.q} links are degenerate, "
            f"{n_aux} have an undefined auxiliary statistic"
        )
    return LinkStatistics(
        summaries, t, kappa_hat, a, two_sided_pvalues(t), degenerate, aux_degenerate
    )
