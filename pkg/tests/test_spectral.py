import numpy as np
import pytest
import scipy.fft

from oracles import dct2_reference, jacobi_eigh

from gsda.cloud import PointCloud
from gsda.errors import BandRangeError, DimensionMismatchError, KTooLargeError
from gsda.shapes import ShapeSpec, synth_shape
from gsda.spectral import (
    BandBounds,
    band_energy,
    band_filter,
    build_knn_graph,
    dct1d,
    eigendecompose,
    gft,
    idct1d,
    igft,
    laplacian,
    spectral_basis,
)


def _random_cloud(n, seed):
    return PointCloud(np.random.default_rng(seed).normal(size=(n, 3)))


def test_knn_graph_symmetric_no_self_loops():
    c = _random_cloud(40, 0)
    g = build_knn_graph(c, 5)
    a = g.adjacency
    assert a.dtype == bool
    assert np.array_equal(a, a.T)
    assert not a.diagonal().any()
    # union symmetrization keeps at least k neighbors per node
    assert (a.sum(axis=1) >= 5).all()


def test_knn_graph_tie_break_lower_index():
    # four corners of a square: each point has two neighbors at equal
    # distance; k=1 must pick the lower-indexed one
    pts = np.array([
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [1.0, 1.0, 0.0],
    ])
    g = build_knn_graph(PointCloud(pts), 1)
    # point 3 is equidistant from 1 and 2; directed choice is 1, and the
    # union keeps edges both ways
    assert g.adjacency[3, 1]
    assert not g.adjacency[3, 2] or g.adjacency[2, 3]


def test_knn_k_too_large():
    c = _random_cloud(6, 1)
    with pytest.raises(KTooLargeError):
        build_knn_graph(c, 6)
    build_knn_graph(c, 5)


def test_laplacian_rows_sum_to_zero_and_psd():
    c = _random_cloud(30, 2)
    lap = laplacian(build_knn_graph(c, 4))
    assert np.allclose(lap, lap.T)
    assert np.abs(lap.sum(axis=1)).max() < 1e-12
    w = np.linalg.eigvalsh(lap)
    assert w.min() > -1e-10


def test_eigendecompose_matches_jacobi_oracle():
    c = _random_cloud(24, 3)
    lap = laplacian(build_knn_graph(c, 4))
    basis = eigendecompose(lap)
    ref_w, ref_v = jacobi_eigh(lap)
    assert np.allclose(basis.lambdas, ref_w, atol=1e-8)
    # columns agree up to sign for well-separated eigenvalues
    gaps = np.diff(ref_w)
    for i in range(len(ref_w)):
        isolated = (i == 0 or gaps[i - 1] > 1e-6) and (
            i == len(ref_w) - 1 or gaps[i] > 1e-6
        )
        if not isolated:
            continue
        dot = abs(float(basis.vectors[:, i] @ ref_v[:, i]))
        assert dot == pytest.approx(1.0, abs=1e-7)


def test_eigendecompose_sign_convention():
    c = _random_cloud(20, 4)
    basis = spectral_basis(c, 4)
    for i in range(20):
        col = basis.vectors[:, i]
        assert col[np.abs(col).argmax()] > 0.0


def test_first_eigenpair_is_constant_vector():
    c = _random_cloud(25, 5)
    basis = spectral_basis(c, 5)
    assert abs(basis.lambdas[0]) < 1e-10
    expect = np.full(25, 1.0 / np.sqrt(25.0))
    assert np.allclose(basis.vectors[:, 0], expect, atol=1e-8)


def test_gft_igft_roundtrip_and_parseval():
    c = _random_cloud(60, 6)
    basis = spectral_basis(c, 8)
    coeffs = gft(basis, c.points)
    back = igft(basis, coeffs)
    assert np.abs(back - c.points).max() < 1e-10
    assert np.linalg.norm(coeffs) == pytest.approx(np.linalg.norm(c.points), rel=1e-12)


def test_gft_rejects_wrong_row_count():
    c = _random_cloud(10, 7)
    basis = spectral_basis(c, 3)
    with pytest.raises(DimensionMismatchError):
        gft(basis, np.zeros((11, 3)))
    with pytest.raises(DimensionMismatchError):
        igft(basis, np.zeros((9, 3)))


def test_band_bounds_and_energy():
    lambdas = np.linspace(0.0, 4.0, 9)
    b = BandBounds.from_lambdas(lambdas, 1.0, 3.0)
    assert b.i_low == 2 and b.i_high == 6
    coeffs = np.zeros((9, 3))
    coeffs[0] = (3.0, 0.0, 0.0)   # low
    coeffs[4] = (0.0, 4.0, 0.0)   # mid
    e = band_energy(coeffs, b)
    assert e == pytest.approx((9.0 / 25.0, 16.0 / 25.0, 0.0))
    assert band_energy(np.zeros((9, 3)), b) == (0.0, 0.0, 0.0)


def test_band_bounds_validation():
    with pytest.raises(BandRangeError):
        BandBounds(i_low=5, i_high=3)


def test_band_filter_modes():
    coeffs = np.ones((8, 3))
    zeroed = band_filter(coeffs, (2, 5), mode="zero")
    assert np.array_equal(zeroed[2:5], np.zeros((3, 3)))
    assert np.array_equal(zeroed[:2], np.ones((2, 3)))
    bumped = band_filter(coeffs, (0, 2), mode="add_constant", delta=0.5)
    assert np.array_equal(bumped[:2], np.full((2, 3), 1.5))
    assert coeffs[3, 0] == 1.0  # input untouched


def test_energy_quantile_bounds_monotone():
    c = synth_shape(ShapeSpec(class_name="cone", n_points=200, seed=1, jitter_sigma=0.05))
    basis = spectral_basis(c, 10)
    coeffs = gft(basis, c.points)
    b = BandBounds.from_energy_quantiles(coeffs)
    assert 0 < b.i_low <= b.i_high <= 200
    e_low, e_mid, e_high = band_energy(coeffs, b)
    assert e_low >= 0.9 - 1e-9
    assert e_low + e_mid >= 0.97 - 1e-9
    assert e_low + e_mid + e_high == pytest.approx(1.0)


def test_dct_matches_definition_and_scipy():
    rng = np.random.default_rng(8)
    x = rng.normal(size=33)
    mine = dct1d(x)
    assert np.allclose(mine, dct2_reference(x), atol=1e-10)
    assert np.allclose(mine, scipy.fft.dct(x, type=2, norm="ortho"), atol=1e-12)
    assert np.allclose(idct1d(mine), x, atol=1e-10)


def test_dct_energy_preserving():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(50, 3))
    y = dct1d(x)
    assert np.linalg.norm(y) == pytest.approx(np.linalg.norm(x), rel=1e-12)
