"""Graph spectral machinery: K-NN graph, combinatorial Laplacian,
eigenbasis, forward/inverse graph Fourier transform, band bookkeeping,
and a 1D DCT used as an ablation transform.

Conventions fixed here and relied on everywhere else:
- the K-NN relation is symmetrized by union (an edge survives if either
  endpoint lists the other),
- distance ties break toward the smaller point index,
- eigenvalues ascend, and each eigenvector is sign-flipped so that its
  largest-magnitude entry is positive.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .cloud import as_points
from .errors import (
    BandRangeError,
    ConvergenceError,
    DimensionMismatchError,
    KTooLargeError,
    ValidationError,
)


@dataclass(frozen=True)
class KnnGraph:
    n: int
    k: int
    adjacency: np.ndarray  # (n, n) bool, symmetric, zero diagonal

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1).astype(np.float64)


@dataclass(frozen=True)
class SpectralBasis:
    """Orthonormal Laplacian eigenbasis; column i of ``vectors`` pairs
    with ``lambdas[i]``."""

    vectors: np.ndarray  # U, (n, n)
    lambdas: np.ndarray  # (n,) ascending, lambdas[0] ~ 0

    @property
    def n(self) -> int:
        return self.vectors.shape[0]


def build_knn_graph(cloud, k: int) -> KnnGraph:
    """Union-symmetrized unweighted K-NN graph under Euclidean distance."""
    pts = as_points(cloud)
    n = pts.shape[0]
    k = int(k)
    if k < 1:
        raise ValidationError("k must be >= 1, got %d" % k)
    if k >= n:
        raise KTooLargeError("k=%d needs at least k+1=%d points, cloud has %d" % (k, k + 1, n))
    sq = np.einsum("ij,ij->i", pts, pts)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (pts @ pts.T)
    np.fill_diagonal(d2, np.inf)
    # stable argsort keeps the smaller index first among exact ties
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    directed = np.zeros((n, n), dtype=bool)
    rows = np.repeat(np.arange(n), k)
    directed[rows, order.ravel()] = True
    adjacency = directed | directed.T
    np.fill_diagonal(adjacency, False)
    return KnnGraph(n=n, k=k, adjacency=adjacency)


def laplacian(graph: KnnGraph) -> np.ndarray:
    """Combinatorial Laplacian L = D - A as a dense float64 matrix."""
    a = graph.adjacency.astype(np.float64)
    lap = -a
    lap[np.diag_indices(graph.n)] = a.sum(axis=1)
    return lap


def eigendecompose(lap: np.ndarray) -> SpectralBasis:
    """Full symmetric eigendecomposition with a deterministic sign fix.

    Degenerate eigenspaces stay routine-dependent; downstream transforms
    only need *some* orthonormal basis of each eigenspace.
    """
    lap = np.asarray(lap, dtype=np.float64)
    if lap.ndim != 2 or lap.shape[0] != lap.shape[1]:
        raise DimensionMismatchError("laplacian must be square, got %r" % (lap.shape,))
    if lap.size and np.abs(lap - lap.T).max() > 1e-10:
        raise ValidationError("matrix is not symmetric within 1e-10")
    try:
        lambdas, vectors = np.linalg.eigh(lap)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError("eigendecomposition failed: %s" % exc) from exc
    # ascending order is eigh's contract already; enforce sign convention
    flip = vectors[np.abs(vectors).argmax(axis=0), np.arange(vectors.shape[1])] < 0
    vectors = np.where(flip[None, :], -vectors, vectors)
    return SpectralBasis(vectors=np.ascontiguousarray(vectors), lambdas=lambdas)


def spectral_basis(cloud, k: int) -> SpectralBasis:
    """Convenience: cloud -> graph -> Laplacian -> eigenbasis."""
    return eigendecompose(laplacian(build_knn_graph(cloud, k)))


def _check_rows(basis: SpectralBasis, arr: np.ndarray, what: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    rows = arr.shape[0] if arr.ndim >= 1 else -1
    if arr.ndim not in (1, 2) or rows != basis.n:
        raise DimensionMismatchError(
            "%s must have %d rows, got shape %r" % (what, basis.n, arr.shape)
        )
    return arr


def gft(basis: SpectralBasis, signal: np.ndarray) -> np.ndarray:
    """Forward transform: coefficients = U^T . signal."""
    signal = _check_rows(basis, signal, "signal")
    return basis.vectors.T @ signal


def igft(basis: SpectralBasis, coeffs: np.ndarray) -> np.ndarray:
    """Inverse transform: signal = U . coefficients (exact inverse of gft)."""
    coeffs = _check_rows(basis, coeffs, "coeffs")
    return basis.vectors @ coeffs


@dataclass(frozen=True)
class BandBounds:
    """Three-way spectrum partition: low = [0, i_low), mid = [i_low,
    i_high), high = [i_high, n).  Build from indices, eigenvalue
    thresholds, or energy quantiles."""

    i_low: int
    i_high: int

    def __post_init__(self):
        if not 0 <= self.i_low <= self.i_high:
            raise BandRangeError(
                "need 0 <= i_low <= i_high, got (%d, %d)" % (self.i_low, self.i_high)
            )

    @staticmethod
    def from_lambdas(lambdas: np.ndarray, lambda_low: float, lambda_high: float) -> "BandBounds":
        """Index bounds of the partition [0,L_low), [L_low,L_high), [L_high,max]."""
        if not 0.0 <= lambda_low <= lambda_high:
            raise BandRangeError("need 0 <= lambda_low <= lambda_high")
        lambdas = np.asarray(lambdas)
        return BandBounds(
            i_low=int(np.searchsorted(lambdas, lambda_low, side="left")),
            i_high=int(np.searchsorted(lambdas, lambda_high, side="left")),
        )

    @staticmethod
    def from_energy_quantiles(coeffs: np.ndarray, q_low: float = 0.9, q_high: float = 0.97) -> "BandBounds":
        """Smallest index prefixes capturing the given energy fractions."""
        if not 0.0 <= q_low <= q_high <= 1.0:
            raise BandRangeError("quantiles must satisfy 0 <= q_low <= q_high <= 1")
        coeffs = np.asarray(coeffs, dtype=np.float64)
        e = (coeffs * coeffs).reshape(coeffs.shape[0], -1).sum(axis=1)
        total = e.sum()
        if total == 0.0:
            return BandBounds(i_low=0, i_high=0)
        frac = np.cumsum(e) / total
        return BandBounds(
            i_low=int(np.searchsorted(frac, q_low, side="left")) + 1,
            i_high=int(np.searchsorted(frac, q_high, side="left")) + 1,
        )


def band_energy(coeffs: np.ndarray, bounds: BandBounds, lambdas=None) -> tuple[float, float, float]:
    """Energy fractions (low, mid, high); energy is the squared sum over
    all coordinate columns jointly.  An all-zero signal reports (0,0,0)."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    n = coeffs.shape[0]
    if bounds.i_high > n:
        raise BandRangeError("bounds exceed coefficient count %d" % n)
    e = (coeffs * coeffs).reshape(n, -1).sum(axis=1)
    total = e.sum()
    if total == 0.0:
        return (0.0, 0.0, 0.0)
    e_low = e[: bounds.i_low].sum() / total
    e_mid = e[bounds.i_low : bounds.i_high].sum() / total
    return (float(e_low), float(e_mid), float(1.0 - e_low - e_mid))


def band_filter(coeffs: np.ndarray, band: tuple[int, int], mode: str = "zero", delta: float = 0.0) -> np.ndarray:
    """Edit coefficient rows in the half-open index range ``band``.

    mode "zero" blanks the rows; mode "add_constant" adds ``delta`` to
    every entry of the rows.  Returns a new array.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    lo, hi = int(band[0]), int(band[1])
    if not 0 <= lo <= hi <= coeffs.shape[0]:
        raise BandRangeError(
            "band (%d, %d) out of range for n=%d" % (lo, hi, coeffs.shape[0])
        )
    out = coeffs.copy()
    if mode == "zero":
        out[lo:hi] = 0.0
    elif mode == "add_constant":
        out[lo:hi] += delta
    else:
        raise ValidationError("unknown band_filter mode %r" % mode)
    return out


def dct1d(signal: np.ndarray) -> np.ndarray:
    """Orthonormal DCT-II of each coordinate column in point-index order."""
    signal = np.asarray(signal, dtype=np.float64)
    return scipy.fft.dct(signal, type=2, axis=0, norm="ortho")


def idct1d(coeffs: np.ndarray) -> np.ndarray:
    """Inverse of dct1d (orthonormal DCT-III)."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    return scipy.fft.idct(coeffs, type=2, axis=0, norm="ortho")


def write_spectrum_csv(path: str, lambdas: np.ndarray, coeffs: np.ndarray) -> None:
    """Per-frequency magnitudes and joint energy, one row per index."""
    lambdas = np.asarray(lambdas, dtype=np.float64)
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.ndim != 2 or coeffs.shape != (lambdas.shape[0], 3):
        raise DimensionMismatchError(
            "coeffs must be (n, 3) aligned with lambdas, got %r" % (coeffs.shape,)
        )
    energy = (coeffs * coeffs).sum(axis=1)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "lambda", "coeff_x", "coeff_y", "coeff_z", "energy"])
        for i in range(lambdas.shape[0]):
            writer.writerow(
                [
                    i,
                    "%.12g" % lambdas[i],
                    "%.12g" % abs(coeffs[i, 0]),
                    "%.12g" % abs(coeffs[i, 1]),
                    "%.12g" % abs(coeffs[i, 2]),
                    "%.12g" % energy[i],
                ]
            )
