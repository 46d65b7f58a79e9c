"""
Simulated two-group network data with known truth.

Every family picks disjoint support sets of links uniformly at random: links in "group1" or
"group2" carry a group specific mean in that group only, links in "shared" carry independently
drawn means in both groups, all other links share a common baseline mean. Supports and link means
are redrawn for every replication and kept fixed across the samples of a replication.
"""

from __future__ import annotations

import logging
import math
from typing import Callable, Dict, Tuple

import numpy as np
import scipy.linalg
from attrs import Factory, define, field

from ._typedattr import definenumpy
from .errors import NetdiffInputError
from .netdata import LinkIndexMap, NetworkSampleStack

logger = logging.getLogger(__name__)

# entries of S' above this are left untransformed by log(round(exp(.)))
WISHART_OVERFLOW_GUARD = 30.0

FAMILY_DEFAULTS: Dict[str, Dict[str, float]] = {
    "bernoulli": {"base_mean": 0.3, "low": 0.5, "high": 0.8, "low_prob": 0.1},
    "bernoulli-mixture": {
        "base_mean": 0.3,
        "low": 0.5,
        "high": 0.7,
        "low_prob": 0.1,
        "shift": 0.2,
    },
    "poisson": {"base_mean": 3.0, "low": 1.0, "high": 6.0},
    "log-normal": {"base_mean": 0.0, "low": 0.5, "high": 1.5, "sigma": 1.0},
    "transformed-wishart": {
        "low": 3.0,
        "high": 5.0,
        "dof": 100,
        "ridge": 0.5,
        "count_floor": 1.0,
    },
    "correlation-network": {"low": 0.3, "high": 0.6, "n_timepoints": 50, "ridge": 0.5},
    "bernoulli-toy": {
        "low_base": 0.1,
        "high_base": 0.9,
        "high_base_share": 1 / 9,
        "low": 0.1,
        "high": 0.9,
    },
}
FAMILIES = tuple(FAMILY_DEFAULTS)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise NetdiffInputError(message)


def _check_family_params(family: str, params: Dict[str, float], p: int) -> None:
    def in_unit(*names):
        for name in names:
            _require(
                0.0 < params[name] < 1.0, f"{family}: {name} must be in (0, 1), got {params[name]}"
            )

    if family == "bernoulli":
        in_unit("base_mean", "low", "high")
        _require(0.0 <= params["low_prob"] <= 1.0, f"{family}: low_prob must be in [0, 1]")
    elif family == "bernoulli-mixture":
        in_unit("base_mean", "low", "high")
        _require(0.0 <= params["low_prob"] <= 1.0, f"{family}: low_prob must be in [0, 1]")
        _require(
            0.0 <= params["shift"] and max(params["low"], params["high"]) + params["shift"] < 1.0,
            f"{family}: shifted means must stay below 1, got shift={params['shift']}",
        )
    elif family == "poisson":
        _require(
            params["base_mean"] > 0 and params["low"] > 0,
            f"{family}: Poisson means must be positive, got base_mean={params['base_mean']}, "
            f"low={params['low']}",
        )
        _require(params["low"] < params["high"], f"{family}: need low < high")
    elif family == "log-normal":
        _require(params["sigma"] > 0, f"{family}: sigma must be positive, got {params['sigma']}")
        _require(params["low"] < params["high"], f"{family}: need low < high")
    elif family == "transformed-wishart":
        _require(params["low"] < params["high"], f"{family}: need low < high")
        _require(params["ridge"] > 0, f"{family}: ridge must be positive")
        _require(params["count_floor"] > 0, f"{family}: count_floor must be positive")
        _require(
            float(params["dof"]).is_integer() and params["dof"] >= p,
            f"{family}: dof must be an integer >= p={p}, got {params['dof']}",
        )
    elif family == "correlation-network":
        _require(params["low"] < params["high"], f"{family}: need low < high")
        _require(params["ridge"] > 0, f"{family}: ridge must be positive")
        _require(
            float(params["n_timepoints"]).is_integer() and params["n_timepoints"] >= 2,
            f"{family}: n_timepoints must be an integer >= 2, got {params['n_timepoints']}",
        )
    elif family == "bernoulli-toy":
        in_unit("low_base", "high_base", "low", "high")
        _require(
            0.0 <= params["high_base_share"] <= 1.0, f"{family}: high_base_share must be in [0, 1]"
        )
        _require(params["low"] < params["high"], f"{family}: need low < high")


def support_sizes(family: str, k_q: int) -> Tuple[int, int, int]:
    """Sizes of the (group1, group2, shared) supports, each rounded down."""
    if family == "transformed-wishart":
        return k_q // 4, k_q // 4, 3 * k_q // 4
    if family == "bernoulli-toy":
        return 0, 0, k_q
    return k_q // 2, k_q // 2, k_q // 2


@define(frozen=True)
class ScenarioSpec:
    """
    One simulation design. family_params holds overrides of FAMILY_DEFAULTS[family] only,
    the merged values are available as params.
    """

    family: str = field()
    n1: int = field()
    n2: int = field()
    k_q: int = field()
    p: int = field(default=68)
    family_params: Dict[str, float] = field(default=Factory(dict))
    seed: int = field(default=0)

    @family.validator
    def _check_family(self, _attribute, value):
        _require(value in FAMILY_DEFAULTS, f"Unknown family '{value}', choose from {FAMILIES}")

    def __attrs_post_init__(self):
        _require(self.p >= 3, f"Need p >= 3 nodes, got {self.p}")
        _require(self.n1 >= 2 and self.n2 >= 2, f"Need n1, n2 >= 2, got {self.n1}, {self.n2}")
        _require(0 <= self.k_q <= self.q, f"Need 0 <= k_q <= q={self.q}, got {self.k_q}")
        unknown = sorted(set(self.family_params) - set(FAMILY_DEFAULTS[self.family]))
        _require(
            not unknown,
            f"Unknown parameters {unknown} for family {self.family}, "
            f"available: {sorted(FAMILY_DEFAULTS[self.family])}",
        )
        n_support = sum(support_sizes(self.family, self.k_q))
        _require(
            n_support <= self.q,
            f"k_q={self.k_q} needs {n_support} disjoint support links but q={self.q}",
        )
        _check_family_params(self.family, self.params, self.p)

    @property
    def q(self) -> int:
        return self.p * (self.p - 1) // 2

    @property
    def params(self) -> Dict[str, float]:
        return {**FAMILY_DEFAULTS[self.family], **self.family_params}


@definenumpy(True)
class ScenarioTruth:
    s1: np.ndarray = field(repr=False)
    s2: np.ndarray = field(repr=False)
    h1_set: np.ndarray
    support_sets: Dict[str, np.ndarray] = field(repr=False)


def replication_rng(seed: int, replication_index: int) -> np.random.Generator:
    """Independent stream of replication r, derived only from (seed, r)."""
    sequence = np.random.SeedSequence(seed, spawn_key=(replication_index,))
    return np.random.Generator(np.random.PCG64(sequence))


def draw_supports(spec: ScenarioSpec, rng: np.random.Generator) -> Dict[str, np.ndarray]:
    n_group1, n_group2, n_shared = support_sizes(spec.family, spec.k_q)
    chosen = rng.choice(spec.q, size=n_group1 + n_group2 + n_shared, replace=False)
    return {
        "group1": np.sort(chosen[:n_group1]),
        "group2": np.sort(chosen[n_group1 : n_group1 + n_group2]),
        "shared": np.sort(chosen[n_group1 + n_group2 :]),
    }


def _group_support(supports: Dict[str, np.ndarray], group: int) -> np.ndarray:
    return np.sort(np.concatenate([supports[f"group{group}"], supports["shared"]]))


def _truth(s1_links, s2_links, index_map: LinkIndexMap, supports) -> ScenarioTruth:
    return ScenarioTruth(
        s1=index_map.to_matrices(s1_links),
        s2=index_map.to_matrices(s2_links),
        h1_set=np.flatnonzero(s1_links != s2_links),
        support_sets=supports,
    )


def _two_point_means(rng, size: int, first: float, second: float, first_prob: float):
    return np.where(rng.random(size) < first_prob, first, second)


def _bernoulli_stacks(spec, rng, s1_links, s2_links):
    index_map = LinkIndexMap(spec.p)
    samples1 = rng.binomial(1, s1_links, size=(spec.n1, spec.q)).astype(np.float64)
    samples2 = rng.binomial(1, s2_links, size=(spec.n2, spec.q)).astype(np.float64)
    return (
        NetworkSampleStack(1, index_map.to_matrices(samples1)),
        NetworkSampleStack(2, index_map.to_matrices(samples2)),
    )


def _generate_bernoulli(spec: ScenarioSpec, rng: np.random.Generator):
    params = spec.params
    supports = draw_supports(spec, rng)
    s1_links = np.full(spec.q, params["base_mean"])
    s2_links = np.full(spec.q, params["base_mean"])
    m1, m2 = _group_support(supports, 1), _group_support(supports, 2)
    # group 1 is mostly high, group 2 mostly low
    s1_links[m1] = _two_point_means(rng, len(m1), params["low"], params["high"], params["low_prob"])
    s2_links[m2] = _two_point_means(rng, len(m2), params["high"], params["low"], params["low_prob"])
    stack1, stack2 = _bernoulli_stacks(spec, rng, s1_links, s2_links)
    return stack1, stack2, _truth(s1_links, s2_links, stack1.index_map, supports)


def _generate_bernoulli_mixture(spec: ScenarioSpec, rng: np.random.Generator):
    params = spec.params
    supports = draw_supports(spec, rng)
    base = params["base_mean"]
    r1_first, r2_first = np.full(spec.q, base), np.full(spec.q, base)
    r1_second, r2_second = np.full(spec.q, base), np.full(spec.q, base)
    m1, m2 = _group_support(supports, 1), _group_support(supports, 2)
    r1_first[m1] = _two_point_means(rng, len(m1), params["low"], params["high"], params["low_prob"])
    r2_first[m2] = _two_point_means(rng, len(m2), params["high"], params["low"], params["low_prob"])
    r1_second[m1] = r1_first[m1] + params["shift"]
    r2_second[m2] = r2_first[m2] + params["shift"]
    # mixing weight per link, shared by both groups
    pi = rng.random(spec.q)
    s1_links = pi * r1_first + (1.0 - pi) * r1_second
    s2_links = pi * r2_first + (1.0 - pi) * r2_second
    stack1, stack2 = _bernoulli_stacks(spec, rng, s1_links, s2_links)
    return stack1, stack2, _truth(s1_links, s2_links, stack1.index_map, supports)


def _generate_bernoulli_toy(spec: ScenarioSpec, rng: np.random.Generator):
    params = spec.params
    supports = draw_supports(spec, rng)
    shared = supports["shared"]
    base = np.where(
        rng.random(spec.q) < params["high_base_share"], params["high_base"], params["low_base"]
    )
    s1_links, s2_links = base.copy(), base.copy()
    s1_links[shared] = rng.uniform(params["low"], params["high"], size=len(shared))
    s2_links[shared] = rng.uniform(params["low"], params["high"], size=len(shared))
    stack1, stack2 = _bernoulli_stacks(spec, rng, s1_links, s2_links)
    return stack1, stack2, _truth(s1_links, s2_links, stack1.index_map, supports)


def poisson_and_lognormal_links(spec: ScenarioSpec, rng: np.random.Generator):
    """
    Poisson counts, or normal draws standing for log-transformed log-normal data.
    Group specific means are Uniform(low, high) on the support, base_mean elsewhere.
    """
    if spec.family not in ("poisson", "log-normal"):
        raise NetdiffInputError(f"Expected a poisson or log-normal spec, got {spec.family}")
    params = spec.params
    supports = draw_supports(spec, rng)
    s1_links = np.full(spec.q, float(params["base_mean"]))
    s2_links = np.full(spec.q, float(params["base_mean"]))
    m1, m2 = _group_support(supports, 1), _group_support(supports, 2)
    s1_links[m1] = rng.uniform(params["low"], params["high"], size=len(m1))
    s2_links[m2] = rng.uniform(params["low"], params["high"], size=len(m2))
    if spec.family == "poisson":
        if np.any(s1_links <= 0) or np.any(s2_links <= 0):
            raise NetdiffInputError("Poisson means must be positive")
        samples1 = rng.poisson(s1_links, size=(spec.n1, spec.q)).astype(np.float64)
        samples2 = rng.poisson(s2_links, size=(spec.n2, spec.q)).astype(np.float64)
    else:
        samples1 = rng.normal(s1_links, params["sigma"], size=(spec.n1, spec.q))
        samples2 = rng.normal(s2_links, params["sigma"], size=(spec.n2, spec.q))
    index_map = LinkIndexMap(spec.p)
    stack1 = NetworkSampleStack(1, index_map.to_matrices(samples1))
    stack2 = NetworkSampleStack(2, index_map.to_matrices(samples2))
    return stack1, stack2, _truth(s1_links, s2_links, index_map, supports)


def ridged_covariance(
    links: np.ndarray, index_map: LinkIndexMap, ridge: float
) -> np.ndarray:
    """Symmetric matrix with the given off-diagonal links, shifted by (|lambda_min| + ridge) I."""
    sigma_prime = index_map.to_matrices(links)
    lambda_min = scipy.linalg.eigvalsh(sigma_prime)[0]
    return sigma_prime + (abs(lambda_min) + ridge) * np.eye(index_map.p)


def wishart_sample(
    scale: np.ndarray, dof: int, rng: np.random.Generator, size: int = 1
) -> np.ndarray:
    """
    Draw from Wishart(scale, dof) with the Bartlett decomposition, mean dof * scale.

    Returns:
        (size, p, p) exactly symmetric samples
    """
    scale = np.asarray(scale, dtype=np.float64)
    p = scale.shape[0]
    if scale.shape != (p, p) or not np.allclose(scale, scale.T):
        raise NetdiffInputError(f"Scale must be a symmetric square matrix, got shape {scale.shape}")
    if dof < p:
        raise NetdiffInputError(f"Degrees of freedom {dof} must be at least p={p}")
    try:
        chol = scipy.linalg.cholesky(scale, lower=True)
    except np.linalg.LinAlgError as e:
        raise NetdiffInputError(f"Scale matrix is not positive definite: {e}") from e

    bartlett = np.zeros((size, p, p))
    diag_rows, diag_cols = np.diag_indices(p)
    bartlett[:, diag_rows, diag_cols] = np.sqrt(rng.chisquare(dof - np.arange(p), size=(size, p)))
    tril_rows, tril_cols = np.tril_indices(p, k=-1)
    bartlett[:, tril_rows, tril_cols] = rng.standard_normal((size, len(tril_rows)))
    factor = chol @ bartlett
    samples = factor @ np.swapaxes(factor, 1, 2)
    return (samples + np.swapaxes(samples, 1, 2)) / 2


def log_round_exp(values: np.ndarray, count_floor: float = 1.0) -> np.ndarray:
    """
    log(round(exp(x))) entrywise, with rounded counts floored at count_floor and entries above
    WISHART_OVERFLOW_GUARD passed through.
    """
    values = np.asarray(values, dtype=np.float64)
    guarded = values > WISHART_OVERFLOW_GUARD
    counts = np.rint(np.exp(np.where(guarded, 0.0, values)))
    transformed = np.log(np.maximum(counts, count_floor))
    return np.where(guarded, values, transformed)


def _generate_transformed_wishart(spec: ScenarioSpec, rng: np.random.Generator):
    params = spec.params
    supports = draw_supports(spec, rng)
    index_map = LinkIndexMap(spec.p)
    dof = int(params["dof"])
    stacks, truth_links = [], []
    for group, n in ((1, spec.n1), (2, spec.n2)):
        support = _group_support(supports, group)
        links = np.zeros(spec.q)
        links[support] = rng.uniform(params["low"], params["high"], size=len(support))
        sigma = ridged_covariance(links, index_map, params["ridge"])
        raw = wishart_sample(sigma / dof, dof, rng, size=n)
        stacks.append(NetworkSampleStack(group, log_round_exp(raw, params["count_floor"])))
        truth_links.append(links)
    return stacks[0], stacks[1], _truth(truth_links[0], truth_links[1], index_map, supports)


def sample_correlation_network(x: np.ndarray) -> np.ndarray:
    """
    Sample covariance with divisor t of the rows of x, x has shape (..., p, t).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2:
        raise NetdiffInputError(f"Expected an array of shape (..., p, t), got {x.shape}")
    n_timepoints = x.shape[-1]
    if n_timepoints < 2:
        raise NetdiffInputError(f"Need at least 2 time points, got t={n_timepoints}")
    centered = x - x.mean(axis=-1, keepdims=True)
    cov = centered @ np.swapaxes(centered, -1, -2) / n_timepoints
    return (cov + np.swapaxes(cov, -1, -2)) / 2


def _generate_correlation_network(spec: ScenarioSpec, rng: np.random.Generator):
    params = spec.params
    supports = draw_supports(spec, rng)
    index_map = LinkIndexMap(spec.p)
    n_timepoints = int(params["n_timepoints"])
    stacks, truth_links = [], []
    for group, n in ((1, spec.n1), (2, spec.n2)):
        support = _group_support(supports, group)
        links = np.zeros(spec.q)
        links[support] = rng.uniform(params["low"], params["high"], size=len(support))
        sigma = ridged_covariance(links, index_map, params["ridge"])
        chol = scipy.linalg.cholesky(sigma, lower=True)
        x = chol @ rng.standard_normal((n, spec.p, n_timepoints))
        stacks.append(NetworkSampleStack(group, sample_correlation_network(x)))
        truth_links.append(links * (n_timepoints - 1) / n_timepoints)
    return stacks[0], stacks[1], _truth(truth_links[0], truth_links[1], index_map, supports)


_GENERATORS: Dict[str, Callable] = {
    "bernoulli": _generate_bernoulli,
    "bernoulli-mixture": _generate_bernoulli_mixture,
    "poisson": poisson_and_lognormal_links,
    "log-normal": poisson_and_lognormal_links,
    "transformed-wishart": _generate_transformed_wishart,
    "correlation-network": _generate_correlation_network,
    "bernoulli-toy": _generate_bernoulli_toy,
}


def generate_scenario(
    spec: ScenarioSpec, replication_index: int
) -> Tuple[NetworkSampleStack, NetworkSampleStack, ScenarioTruth]:
    """
    Data of one replication. Identical (spec, replication_index) gives bit-identical output.
    """
    rng = replication_rng(spec.seed, replication_index)
    stack1, stack2, truth = _GENERATORS[spec.family](spec, rng)
    logger.debug(
        f"{spec.family} replication {replication_index}: {len(truth.h1_set)} of {spec.q} links "
        f"differ in mean"
    )
    return stack1, stack2, truth


def fraction_to_kq(fraction: float, p: int) -> int:
    """k_q = floor(fraction * q)."""
    if not 0.0 <= fraction <= 1.0:
        raise NetdiffInputError(f"k_q fraction must be in [0, 1], got {fraction}")
    return int(math.floor(fraction * (p * (p - 1) // 2)))
