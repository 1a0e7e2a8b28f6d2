"""Exact Euclidean k-nearest-neighbor class counts."""

from __future__ import annotations

import numpy as np

from entropy_fsvm.app_types import K_GRID, Dataset, NeighborProfile
from entropy_fsvm.data import DatasetError

MAX_K = K_GRID[-1]

# float64 cells of the difference tensor materialised per chunk
_CHUNK_CELLS = 1 << 22


def _rank_rows(
    features: np.ndarray, rows: np.ndarray, n_neighbors: int
) -> np.ndarray:
    diff = features[rows, None, :] - features[None, :, :]
    dist = np.einsum("ijk,ijk->ij", diff, diff)
    dist[np.arange(rows.size), rows] = np.inf
    # stable sort keeps ascending index among equal distances
    order = np.argsort(dist, axis=1, kind="stable")
    return order[:, :n_neighbors]


def ranked_neighbors(features: np.ndarray, n_neighbors: int) -> np.ndarray:
    """Indices of the `n_neighbors` nearest samples of every sample.

    Brute-force scan over squared Euclidean distances. The query sample
    is excluded and equal distances are ordered by ascending index.

    Parameters
    ----------
    features : np.ndarray
        N x D matrix.
    n_neighbors : int
        neighbors per sample, at most N - 1.

    Returns
    -------
    np.ndarray
        N x n_neighbors index matrix, nearest first.
    """
    n, dim = features.shape
    if not 1 <= n_neighbors <= n - 1:
        msg = f"{n_neighbors} neighbors requested from {n} samples"
        raise DatasetError(msg)

    chunk = max(1, _CHUNK_CELLS // (n * dim))
    ranked = np.empty((n, n_neighbors), dtype=np.int64)
    for start in range(0, n, chunk):
        rows = np.arange(start, min(start + chunk, n))
        ranked[rows] = _rank_rows(features, rows, n_neighbors)
    return ranked


def _require_full_grid(ds: Dataset) -> None:
    if ds.n_samples < MAX_K + 1:
        msg = (
            f"{ds.name}: {ds.n_samples} samples, at least {MAX_K + 1} "
            f"are needed for {MAX_K} neighbors"
        )
        raise DatasetError(msg)


def positive_counts(ds: Dataset, k: int) -> np.ndarray:
    """Number of +1 samples among each sample's k nearest neighbors."""
    neighbors = ranked_neighbors(ds.features, k)
    return (ds.labels[neighbors] == 1).sum(axis=1)


def neighbor_profiles(ds: Dataset) -> np.ndarray:
    """N x 8 matrix of positive counts for k = 1, 3, ..., 15."""
    _require_full_grid(ds)
    neighbors = ranked_neighbors(ds.features, MAX_K)
    cumulative = np.cumsum(ds.labels[neighbors] == 1, axis=1)
    return cumulative[:, np.asarray(K_GRID) - 1]


def knn_class_counts(ds: Dataset, i: int) -> NeighborProfile:
    """Neighbor profile of sample `i`."""
    _require_full_grid(ds)
    if not 0 <= i < ds.n_samples:
        raise DatasetError(f"sample index {i} out of range")

    order = _rank_rows(ds.features, np.array([i]), MAX_K)[0]
    cumulative = np.cumsum(ds.labels[order] == 1)
    counts = cumulative[np.asarray(K_GRID) - 1]
    return NeighborProfile(
        sample_index=i, pos_counts=tuple(int(c) for c in counts)
    )
