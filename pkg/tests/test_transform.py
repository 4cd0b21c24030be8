import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from odar.dataset import SyntheticSpec, generate
from odar.exceptions import ParameterError, StructuralError
from odar.neighbors import build_index, knn_distances
from odar.dataset import Dataset
from odar.transform import (
    OdarSpace,
    assemble,
    bandwidth,
    construct_odar_space,
    default_beta,
    high_order_density,
    local_density,
    mean_window_count,
    shrink,
)

from oracles import brute_high_order_density, brute_knn, literal_local_density

LINE4 = np.array([[0.0], [1.0], [2.0], [10.0]])
# -4 * [1, 1, 1, e] / (3 + e), evaluated separately
LINE4_RHO = [-0.6995108181084378] * 3 + [-1.9014675456746868]
LINE4_HRHO = [3.8521437889662113] * 3 + [3.556431366898634]


def test_line_example_local_density():
    knn = knn_distances(build_index(Dataset(LINE4)), Dataset(LINE4), 1)
    np.testing.assert_array_equal(knn.dist[:, 0], [1, 1, 1, 8])
    rho = local_density(knn)
    np.testing.assert_allclose(rho, LINE4_RHO, rtol=1e-12)
    assert np.argmin(rho) == 3


def test_constant_distances_give_minus_one():
    rho = local_density(np.full((6, 3), 2.5))
    np.testing.assert_array_equal(rho, -np.ones(6))
    rho = local_density(np.full((6, 3), 2.5), normalization="per-rank")
    np.testing.assert_array_equal(rho, -np.ones(6))


def test_local_density_matches_literal(rng):
    pts = rng.normal(size=(300, 2))
    dist, _ = brute_knn(pts, 5)
    np.testing.assert_allclose(local_density(dist), literal_local_density(dist), rtol=1e-12)


def test_per_rank_normalization(rng):
    dist = np.sort(rng.random((50, 4)), axis=1)
    lo, hi = dist.min(axis=0), dist.max(axis=0)
    sums = np.exp((dist - lo) / (hi - lo)).sum(axis=1)
    np.testing.assert_allclose(local_density(dist, "per-rank"), -sums / sums.mean(), rtol=1e-12)
    assert not np.allclose(local_density(dist, "per-rank"), local_density(dist, "global"))


def test_local_density_rejects_single_row():
    with pytest.raises(StructuralError):
        local_density(np.ones((1, 2)))
    with pytest.raises(ParameterError):
        local_density(np.ones((3, 2)), normalization="bogus")


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 60), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_mean_is_minus_one_and_all_negative(n, k, seed):
    dist = np.sort(np.random.default_rng(seed).exponential(size=(n, k)), axis=1)
    rho = local_density(dist)
    assert abs(rho.mean() + 1) <= 1e-9
    assert np.all(rho < 0)


def test_hrho_single_value():
    hrho, sigma = high_order_density([-1.0])
    assert sigma == 0 and hrho.tolist() == [1.0]


def test_hrho_all_equal():
    hrho, sigma = high_order_density(np.full(7, -1.0))
    assert sigma == 0
    np.testing.assert_array_equal(hrho, np.full(7, 7.0))


def test_hrho_matches_double_loop(rng):
    rho = -rng.gamma(3, size=2000)
    hrho, sigma = high_order_density(rho)
    ref, ref_sigma = brute_high_order_density(rho)
    assert sigma == ref_sigma == bandwidth(rho)
    np.testing.assert_allclose(hrho, ref, atol=1e-9, rtol=0)


def test_hrho_window_boundary_is_inclusive():
    # N=10, range 1 -> sigma = 1: the extremes see each other exactly at the boundary
    rho = np.array([-2.0, -1.0] + [-1.5] * 8)
    hrho, sigma = high_order_density(rho)
    assert sigma == 1.0
    ref, _ = brute_high_order_density(rho)
    np.testing.assert_allclose(hrho, ref, atol=1e-12)
    # the -2 point: self + itself-to--1 term at distance sigma + eight at 0.5 sigma
    expected = 1 + math.exp(-1) + 8 * math.exp(-0.25)
    assert hrho[0] == pytest.approx(expected, abs=1e-12)


def test_hrho_at_least_one(rng):
    hrho, sigma = high_order_density(rng.normal(size=500))
    assert sigma > 0 and np.all(hrho >= 1)


def test_one_sided_window_follows_sorted_scan():
    rho = np.array([0.0, 0.1, 0.15, 1.0])
    hrho, sigma = high_order_density(rho, window="one-sided")
    s = sigma
    # walk upward from each sorted value while below value + sigma, never reaching the last slot
    expected = np.zeros(4)
    srt = np.sort(rho)
    for i in range(4):
        j = i
        while srt[j] < srt[i] + s and j < 3:
            expected[i] += math.exp(-((srt[j] - srt[i]) ** 2) / s**2)
            j += 1
    np.testing.assert_allclose(hrho, expected, atol=1e-15)
    assert hrho[3] == 0.0


def test_mean_window_count(rng):
    rho = rng.normal(size=300)
    sigma = bandwidth(rho)
    ref = np.mean([(np.abs(rho - r) <= sigma).sum() for r in rho])
    assert mean_window_count(rho) == pytest.approx(ref)


def test_assemble_basic():
    sp = assemble([-1.0], [1.0])
    np.testing.assert_array_equal(sp.coords, [[-1.0, 1.0]])
    assert sp.shrunk is False


def test_assemble_round_trip(rng):
    rho, hrho = -rng.random(20), rng.random(20)
    sp = assemble(rho, hrho)
    np.testing.assert_array_equal(sp.rho, rho)
    np.testing.assert_array_equal(sp.hrho, hrho)


def test_assemble_length_mismatch():
    with pytest.raises(StructuralError):
        assemble([1.0, 2.0], [1.0])


def test_shrink_two_points_swap():
    sp = OdarSpace(np.array([[0.0, 1.0], [3.0, 5.0]]))
    out = shrink(sp, 1)
    np.testing.assert_array_equal(out.coords, [[3.0, 5.0], [0.0, 1.0]])
    assert out.shrunk


def test_shrink_coincident_unchanged():
    sp = OdarSpace(np.tile([[-1.0, 4.0]], (9, 1)))
    np.testing.assert_array_equal(shrink(sp, 3).coords, sp.coords)


def test_shrink_is_centroid_of_snapshot_neighbors(rng):
    coords = rng.normal(size=(60, 2))
    out = shrink(OdarSpace(coords), 5).coords
    _, idx = brute_knn(coords, 5)
    np.testing.assert_allclose(out, coords[idx].mean(axis=1), rtol=0, atol=1e-14)


def _mean_pairwise(x):
    d = np.sqrt(((x[:, None] - x[None]) ** 2).sum(-1))
    return d[np.triu_indices(len(x), 1)].mean()


def test_shrink_compacts_blob(rng):
    blob = rng.normal(size=(500, 2))
    out = shrink(OdarSpace(blob), 50).coords
    assert _mean_pairwise(out) < _mean_pairwise(blob)


def test_shrink_beta_bounds():
    sp = OdarSpace(np.zeros((4, 2)))
    with pytest.raises(ParameterError):
        shrink(sp, 4)
    with pytest.raises(ParameterError):
        shrink(sp, 0)
    assert default_beta(4) == 1 and default_beta(1000) == 100


def test_construct_line_example_chains_oracles():
    space, prof = construct_odar_space(LINE4, 1, do_shrink=False)
    np.testing.assert_allclose(space.rho, LINE4_RHO, rtol=1e-12)
    np.testing.assert_allclose(space.hrho, LINE4_HRHO, rtol=1e-12)
    assert prof.sigma == pytest.approx(10 * (LINE4_RHO[0] - LINE4_RHO[3]) / 4)


def test_construct_without_shrink_is_raw_profile(rng):
    space, prof = construct_odar_space(rng.normal(size=(100, 3)), 4, do_shrink=False)
    assert not space.shrunk
    np.testing.assert_array_equal(space.rho, prof.rho)
    np.testing.assert_array_equal(space.hrho, prof.hrho)


def test_construct_k_bound():
    with pytest.raises(ParameterError):
        construct_odar_space(np.zeros((3, 2)) + np.arange(3)[:, None], 3)


def test_similarity_invariance():
    ds = generate(SyntheticSpec("gauss-blobs-with-uniform-noise", (150, 150), 20, seed=4))
    pts = ds.points
    theta = 1.1
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    _, base = construct_odar_space(pts, 6, do_shrink=False)
    for moved in (pts * 10, pts + 123.0, pts @ rot.T, 0.37 * (pts @ rot.T) - 4.0):
        _, prof = construct_odar_space(moved, 6, do_shrink=False)
        np.testing.assert_allclose(prof.rho, base.rho, atol=1e-9, rtol=0)
        np.testing.assert_allclose(prof.hrho, base.hrho, atol=1e-9, rtol=0)
        assert prof.sigma == pytest.approx(base.sigma, abs=1e-9)


def test_outlier_rho_sparser_and_hrho_lower():
    ds = generate(SyntheticSpec("gauss-blobs-with-uniform-noise", (500, 500), 60, seed=3))
    _, prof = construct_odar_space(ds.points, 6, do_shrink=False)
    gap_out = np.diff(np.sort(prof.rho[ds.labels])).mean()
    gap_norm = np.diff(np.sort(prof.rho[~ds.labels])).mean()
    assert gap_out > gap_norm
    assert np.median(prof.hrho[ds.labels]) < np.median(prof.hrho[~ds.labels])


def test_exponential_gap_inequality(rng):
    # a < b < c < d with b - a < d - c implies e^b - e^a < e^d - e^c
    count = 0
    while count < 2000:
        a, b, c, d = np.sort(rng.uniform(-20, 20, size=4))
        if not (a < b < c < d and b - a < d - c):
            continue
        count += 1
        assert math.exp(b) - math.exp(a) < math.exp(d) - math.exp(c)
