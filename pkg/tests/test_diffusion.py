import itertools
import json
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from ddmap import diffusion as dm
from ddmap.diffusion import (
    KernelConfig,
    affinity,
    alpha_normalize,
    canonical_sign,
    diffusion_distance,
    diffusion_map,
    diffusion_operator,
    embed,
    pairwise_sq_dists,
    select_bandwidth,
    spectral_decompose,
)
from ddmap.timeseries import DDMapWarning


def _cloud(seed, n=12, p=3):
    return np.random.default_rng(seed).standard_normal((n, p))


# -- distances and bandwidth ---------------------------------------------------------------

def test_pairwise_hand_cases(rng):
    np.testing.assert_array_equal(pairwise_sq_dists([[0, 0], [3, 4]]), [[0, 25], [25, 0]])
    np.testing.assert_array_equal(pairwise_sq_dists(np.ones((4, 3))), np.zeros((4, 4)))
    X = rng.standard_normal((3, 5))
    brute = np.array([[np.sum((X[i] - X[j]) ** 2) for j in range(3)] for i in range(3)])
    np.testing.assert_allclose(pairwise_sq_dists(X), brute, rtol=1e-12)
    D2 = pairwise_sq_dists(rng.standard_normal((20, 4)))
    assert np.array_equal(D2, D2.T) and np.all(np.diag(D2) == 0)


def test_pairwise_errors():
    with pytest.raises(ValueError):
        pairwise_sq_dists([[0.0, np.inf], [1.0, 2.0]])
    with pytest.raises(ValueError):
        pairwise_sq_dists([[0.0, 1.0]])


def test_quartile_counts_diagonal_zeros():
    D2 = 4.0 * (1 - np.eye(3))
    strict = KernelConfig(bandwidth_rule="quartile_all_pairs", bandwidth_fallback=False)
    with pytest.raises(ValueError, match="degenerate bandwidth"):
        select_bandwidth(D2, strict)
    with pytest.warns(DDMapWarning, match="without zero"):
        assert select_bandwidth(D2, KernelConfig()) == 4.0


def test_quartile_is_linear_percentile_of_all_entries(rng):
    D2 = pairwise_sq_dists(rng.standard_normal((9, 2)))
    vals = np.sort(D2.ravel())
    pos = 0.25 * (vals.size - 1)
    lo = int(np.floor(pos))
    expect = vals[lo] + (pos - lo) * (vals[lo + 1] - vals[lo])
    assert select_bandwidth(D2, KernelConfig()) == pytest.approx(expect, rel=1e-14)


def test_knn_and_explicit_bandwidth():
    D2 = 4.0 * (1 - np.eye(3))
    assert select_bandwidth(D2, KernelConfig(bandwidth_rule="knn_percentile", k=1, pct=50)) == 4.0
    assert select_bandwidth(D2, KernelConfig(bandwidth_rule="explicit", h=0.7)) == 0.7
    with pytest.raises(ValueError):
        select_bandwidth(D2, KernelConfig(bandwidth_rule="knn_percentile", k=3))


def test_kernel_config_validation():
    for bad in (dict(alpha=1.5), dict(t=0), dict(d=0), dict(bandwidth_rule="explicit"),
                dict(bandwidth_rule="silverman"), dict(negative_modes="clip")):
        with pytest.raises(ValueError):
            KernelConfig(**bad)


# -- affinity and normalization ----------------------------------------------------------------

def test_affinity_cases():
    assert affinity(np.array([[0.0, 2.0], [2.0, 0.0]]), 2.0)[0, 1] == pytest.approx(np.exp(-1))
    W = affinity(np.log(4) * (1 - np.eye(3)), 1.0)
    np.testing.assert_allclose(W, np.where(np.eye(3) == 1, 1.0, 0.25), rtol=1e-15)
    assert np.all(np.diag(affinity(np.ones((3, 3)), 1.0, zero_diagonal=True)) == 0)


def test_alpha_normalize_cases(rng):
    W = np.exp(-pairwise_sq_dists(rng.standard_normal((5, 2))))
    np.testing.assert_array_equal(alpha_normalize(W, 0.0), W)
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_array_equal(alpha_normalize(swap, 1.0), swap)
    star = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    np.testing.assert_allclose(alpha_normalize(star, 1.0),
                               [[0, 0.5, 0.5], [0.5, 0, 0], [0.5, 0, 0]], rtol=1e-15)
    np.testing.assert_allclose(alpha_normalize(star, 0.5),
                               [[0, 1 / np.sqrt(2), 1 / np.sqrt(2)], [1 / np.sqrt(2), 0, 0],
                                [1 / np.sqrt(2), 0, 0]], rtol=1e-15)
    with pytest.raises(ValueError, match="isolated point"):
        alpha_normalize(np.array([[0.0, 0.0], [0.0, 1.0]]), 1.0)


def test_diffusion_operator_cases():
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_array_equal(diffusion_operator(swap), swap)
    W = np.array([[1.0, 0.5, 0.25], [0.5, 1.0, 0.5], [0.25, 0.5, 1.0]])
    brute = np.diag(1 / W.sum(axis=1)) @ W
    np.testing.assert_allclose(diffusion_operator(W), brute, rtol=1e-14)


@given(arrays(np.float64, st.tuples(st.integers(2, 15), st.integers(1, 4)), elements=st.floats(-5, 5)),
       st.floats(0.05, 20), st.floats(0, 1), st.booleans())
def test_rows_sum_to_one(X, h, alpha, zero_diag):
    W = affinity(pairwise_sq_dists(X), h, zero_diag)
    if np.any(W.sum(axis=1) == 0):
        return
    A = diffusion_operator(alpha_normalize(W, alpha))
    assert np.max(np.abs(A.sum(axis=1) - 1)) <= 1e-12


# -- spectral decomposition -------------------------------------------------------------------

def test_two_point_spectrum():
    dec = spectral_decompose(np.array([[0.0, 1.0], [1.0, 0.0]]), 1)
    np.testing.assert_allclose(dec.eigenvalues, [1.0, -1.0], atol=1e-15)
    np.testing.assert_allclose(dec.eigenvectors[:, 1], [1 / np.sqrt(2), -1 / np.sqrt(2)], atol=1e-15)
    emb = embed(dec, t=1, d=1)
    np.testing.assert_allclose(emb.coords[:, 0], [-1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-15)


def test_complete_graph_spectrum():
    W = np.ones((3, 3))
    np.testing.assert_allclose(diffusion_operator(W), np.full((3, 3), 1 / 3), rtol=1e-15)
    dec = spectral_decompose(W, 2)
    np.testing.assert_allclose(dec.eigenvalues, [1.0, 0.0, 0.0], atol=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_residuals_and_structure(seed):
    X = _cloud(seed, n=30)
    W = affinity(pairwise_sq_dists(X), 2.0)
    Wa = alpha_normalize(W, 1.0)
    dec = spectral_decompose(Wa, 10)
    A = diffusion_operator(Wa)
    for k in range(dec.n_modes):
        phi = dec.eigenvectors[:, k]
        assert np.linalg.norm(A @ phi - dec.eigenvalues[k] * phi) <= 1e-8 * np.linalg.norm(phi)
        assert np.linalg.norm(phi) == pytest.approx(1.0, abs=1e-12)
        i = int(np.argmax(np.abs(phi)))
        assert phi[i] > 0
    assert dec.eigenvalues[0] == pytest.approx(1.0, abs=1e-8)
    assert np.all(np.diff(dec.eigenvalues) <= 1e-10)
    assert dec.eigenvalues[1] <= 1.0
    assert np.ptp(dec.eigenvectors[:, 0]) <= 1e-6 * np.abs(dec.eigenvectors[:, 0]).mean()


@given(st.integers(3, 20), st.integers(0, 2 ** 31 - 1), st.floats(0.0, 1.0), st.booleans())
def test_eigenvalues_match_dense_nonsymmetric_solve(n, seed, alpha, zero_diag):
    X = np.random.default_rng(seed).standard_normal((n, 3))
    D2 = pairwise_sq_dists(X)
    W = affinity(D2, float(np.median(D2[D2 > 0])), zero_diag)
    Wa = alpha_normalize(W, alpha)
    dec = spectral_decompose(Wa, n - 1)
    ref = np.sort(np.linalg.eigvals(diffusion_operator(Wa)).real)[::-1]
    np.testing.assert_allclose(dec.eigenvalues, ref, atol=1e-8)


def test_iterative_solver_path(monkeypatch):
    X = _cloud(3, n=60)
    W = alpha_normalize(affinity(pairwise_sq_dists(X), 3.0), 1.0)
    dense = spectral_decompose(W, 5)
    monkeypatch.setattr(dm, "DENSE_LIMIT", 10)
    sparse = spectral_decompose(W, 5)
    np.testing.assert_allclose(sparse.eigenvalues, dense.eigenvalues, atol=1e-10)
    np.testing.assert_allclose(sparse.eigenvectors, dense.eigenvectors, atol=1e-7)


def test_disconnected_graph_is_reported():
    X = np.r_[_cloud(1, 10, 2), _cloud(2, 10, 2) + 100]
    with pytest.warns(DDMapWarning, match="disconnected"):
        emb = diffusion_map(X, KernelConfig(d=3, t=1))
    assert emb.component_count == 2


def test_canonical_sign_ties_go_to_first_index():
    np.testing.assert_array_equal(canonical_sign(np.array([-1.0, 1.0])), [1.0, -1.0])
    np.testing.assert_array_equal(canonical_sign(np.array([0.5, -2.0])), [-0.5, 2.0])


# -- embedding ------------------------------------------------------------------------------------

def test_embedding_decays_with_time():
    X = _cloud(4, n=25)
    Wa = alpha_normalize(affinity(pairwise_sq_dists(X), 3.0), 1.0)
    dec = spectral_decompose(Wa, 5)
    norms = [np.abs(embed(dec, t, 5).coords).max() for t in (1, 2, 5, 20, 80)]
    assert all(b < a for a, b in zip(norms, norms[1:]))
    assert norms[-1] < 1e-3


def test_full_dimension_keeps_every_mode():
    X = _cloud(5, n=8)
    emb = diffusion_map(X, KernelConfig(d=7, t=1))
    assert emb.coords.shape == (8, 7)
    with pytest.raises(ValueError):
        diffusion_map(X, KernelConfig(d=8, t=1))


def test_negative_modes_with_fractional_time():
    dec = spectral_decompose(np.array([[0.0, 1.0], [1.0, 0.0]]), 1)
    with pytest.raises(ValueError, match="fractional power of negative eigenvalue"):
        embed(dec, t=0.5, d=1, negative_modes="error")
    with pytest.warns(DDMapWarning, match="dropping 1"):
        emb = embed(dec, t=0.5, d=1)
    assert emb.coords.shape == (2, 0)
    np.testing.assert_allclose(embed(dec, t=3, d=1).coords[:, 0], [-1 / np.sqrt(2), 1 / np.sqrt(2)])


def test_diffusion_distance_metric_properties():
    emb = diffusion_map(_cloud(6, n=10), KernelConfig(d=4, t=1))
    n = 10
    for i in range(n):
        assert diffusion_distance(emb, i, i) == 0.0
    for i, j in itertools.combinations(range(n), 2):
        assert diffusion_distance(emb, i, j) == diffusion_distance(emb, j, i)
    for i, j, k in itertools.permutations(range(n), 3):
        assert diffusion_distance(emb, i, k) <= diffusion_distance(emb, i, j) + diffusion_distance(emb, j, k) + 1e-15


def test_scale_invariance_chain():
    X = _cloud(7, n=30)
    c = 3.7
    base = diffusion_map(X, KernelConfig(bandwidth_rule="explicit", h=2.0, d=5, t=2))
    scaled = diffusion_map(c * X, KernelConfig(bandwidth_rule="explicit", h=2.0 * c * c, d=5, t=2))
    W0 = affinity(pairwise_sq_dists(X), 2.0)
    W1 = affinity(pairwise_sq_dists(c * X), 2.0 * c * c)
    np.testing.assert_allclose(W1, W0, atol=1e-12)
    np.testing.assert_allclose(scaled.coords, base.coords, atol=1e-12)
    np.testing.assert_allclose(scaled.eigenvalues, base.eigenvalues, atol=1e-12)


@given(st.integers(0, 2 ** 31 - 1), st.integers(0, 2 ** 31 - 1))
def test_permutation_equivariance(seed, perm_seed):
    X = np.random.default_rng(seed).standard_normal((15, 3))
    perm = np.random.default_rng(perm_seed).permutation(15)
    cfg = KernelConfig(d=4, t=1)
    a = diffusion_map(X, cfg)
    b = diffusion_map(X[perm], cfg)
    gaps = np.abs(np.diff(a.all_eigenvalues))
    if gaps.min() < 1e-6:
        return  # repeated eigenvalues: basis-dependent coordinates
    np.testing.assert_allclose(b.coords, a.coords[perm], atol=1e-10)
    np.testing.assert_allclose(b.eigenvalues, a.eigenvalues, atol=1e-12)


def test_identical_points_give_trivial_spectrum():
    X = np.ones((12, 4))
    emb = diffusion_map(X, KernelConfig(bandwidth_rule="explicit", h=1.0, d=3, t=1))
    assert np.sqrt(np.mean(emb.coords ** 2)) <= 1e-6 * np.linalg.norm(X[0])


def test_export_format(tmp_path):
    emb = diffusion_map(_cloud(8, n=10), KernelConfig(d=3, t=1))
    emb.export(tmp_path / "e.csv", tmp_path / "e.json", np.arange(10) * 5, np.arange(10) * 0.5)
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "landmark_sample,time_s,coord_1,coord_2,coord_3"
    assert lines[2].startswith("5,0.5,")
    rep = json.loads((tmp_path / "e.json").read_text())
    assert set(rep) == {"lambda", "h", "alpha", "t", "d"} and rep["d"] == 3 and len(rep["lambda"]) == 3


def test_fallback_and_explicit_bandwidth_on_duplicates():
    X = np.r_[np.zeros((10, 2)), np.ones((2, 2))]
    with pytest.raises(ValueError, match="degenerate bandwidth"):
        diffusion_map(X, KernelConfig(d=2, bandwidth_fallback=False))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        emb = diffusion_map(X, KernelConfig(d=2))
    assert emb.h == 2.0
