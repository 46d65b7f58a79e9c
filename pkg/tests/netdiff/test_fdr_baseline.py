import numpy as np
import pytest

from netdiff.errors import NetdiffInputError
from netdiff.fdr_baseline import estimate_fdp, run_baseline_test, search_bound, threshold_search
from netdiff.stats_core import normal_sf


def test_estimate_fdp():
    # 2 q (1 - Phi(3)) / R(3) with q = 4 and two rejections
    assert estimate_fdp(3.0, [3.0, -3.0, 0.0, 0.0]) == pytest.approx(4 * 0.0013498980316301)
    # no rejections counts as one
    assert estimate_fdp(3.0, [0.0, 0.0]) == pytest.approx(4 * 0.0013498980316301)
    with pytest.raises(NetdiffInputError):
        estimate_fdp(-1.0, [0.0])


def test_search_bound():
    assert search_bound(100) == pytest.approx(np.sqrt(2 * np.log(100)))


def _brute_force_rejections(t, alpha):
    """Scan a grid of step 1e-4 over [0, sqrt(2 log q)], the grid contains every |T|."""
    bound = search_bound(len(t))
    grid = np.arange(int(bound * 1e4) + 1) / 1e4
    grid = grid[grid <= bound]
    qualified = [h for h in grid if estimate_fdp(h, t) <= alpha]
    h = qualified[0] if qualified else bound
    return np.flatnonzero(np.abs(t) >= h)


@pytest.mark.parametrize(
    "seed, n_signal, shift, alpha",
    [
        pytest.param(0, 30, 4.0, 0.1, id="strong"),
        pytest.param(1, 20, 2.5, 0.05, id="moderate"),
        pytest.param(2, 0, 0.0, 0.05, id="null"),
    ],
)
def test_threshold_search_matches_grid_scan(seed, n_signal, shift, alpha):
    rng = np.random.default_rng(seed)
    t = rng.normal(size=190)
    t[:n_signal] += shift
    t = np.round(t * 1e4) / 1e4
    result = run_baseline_test(t, alpha)
    np.testing.assert_array_equal(result.rejected, _brute_force_rejections(t, alpha))


def test_all_null_returns_bound():
    t = np.zeros(100)
    assert threshold_search(t, 0.05) == search_bound(100)
    result = run_baseline_test(t)
    assert result.n_rejections == 0


def test_signals_beyond_the_bound_are_rejected():
    t = np.zeros(100)
    t[:10] = 10.0
    result = run_baseline_test(t, 0.05)
    assert result.threshold == search_bound(100)
    np.testing.assert_array_equal(result.rejected, np.arange(10))
    assert result.estimated_fdp == pytest.approx(estimate_fdp(search_bound(100), t))
    assert result.rejected_mask(100).sum() == 10
    assert result.method == "baseline"


def test_threshold_is_an_observed_value():
    t = np.array([0.1, 0.5, 3.0, 3.2, 3.4, 3.5, 3.8, 4.0, -3.1, 0.0] * 3)
    h = threshold_search(t, 0.2)
    assert h in np.abs(t) or h == search_bound(len(t))
    assert estimate_fdp(h, t) <= 0.2 or h == search_bound(len(t))


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1])
def test_threshold_search_alpha(alpha):
    with pytest.raises(NetdiffInputError):
        threshold_search([1.0, 2.0], alpha)


def _grid_rejections(t, alpha):
    """Same scan as _brute_force_rejections, vectorized over the grid."""
    abs_t = np.abs(t)
    bound = search_bound(len(t))
    grid = np.arange(int(bound * 1e4) + 1) / 1e4
    grid = grid[grid <= bound]
    n_rejected = (abs_t[None, :] >= grid[:, None]).sum(axis=1)
    fdp = 2.0 * len(t) * normal_sf(grid) / np.maximum(n_rejected, 1)
    qualified = np.flatnonzero(fdp <= alpha)
    h = grid[qualified[0]] if len(qualified) else bound
    return np.flatnonzero(abs_t >= h)


def _random_statistics(rng, q, decimals):
    t = rng.normal(size=q)
    n_signal = rng.integers(0, q // 3 + 1)
    t[:n_signal] += rng.uniform(1.0, 5.0) * rng.choice([-1.0, 1.0], size=n_signal)
    return np.round(t * 10**decimals) / 10**decimals


@pytest.mark.slow
def test_threshold_search_matches_grid_scan_many():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        q = int(rng.integers(3, 60))
        # two decimals produce ties, the 1e-4 grid still contains every |T|
        t = _random_statistics(rng, q, decimals=int(rng.choice([2, 4])))
        alpha = float(rng.choice([0.01, 0.05, 0.1, 0.2]))
        rejected = run_baseline_test(t, alpha).rejected
        np.testing.assert_array_equal(rejected, _grid_rejections(t, alpha))


def test_rejections_grow_with_alpha():
    rng = np.random.default_rng(8)
    for _ in range(200):
        t = _random_statistics(rng, int(rng.integers(3, 200)), decimals=3)
        previous = set()
        for alpha in (0.01, 0.05, 0.1, 0.2, 0.4):
            rejected = set(run_baseline_test(t, alpha).rejected.tolist())
            assert previous <= rejected
            previous = rejected


def test_permutation_equivariance():
    rng = np.random.default_rng(9)
    for _ in range(200):
        t = _random_statistics(rng, int(rng.integers(3, 200)), decimals=2)
        perm = rng.permutation(len(t))
        result = run_baseline_test(t, 0.1)
        permuted = run_baseline_test(t[perm], 0.1)
        assert permuted.threshold == result.threshold
        np.testing.assert_array_equal(np.sort(perm[permuted.rejected]), result.rejected)
