import numpy as np
import pytest
from pydantic import ValidationError

from entropy_fsvm.app_types import K_GRID, Dataset, NeighborProfile
from entropy_fsvm.data import DatasetError
from entropy_fsvm.neighbors import (
    knn_class_counts,
    neighbor_profiles,
    positive_counts,
    ranked_neighbors,
)
from tests.utils.oracles import brute_knn_counts


def line_dataset() -> Dataset:
    """Query at 0, neighbors at 1..15; positives at ranks 11 to 15."""
    features = np.arange(16, dtype=float)[:, None]
    labels = [-1] * 11 + [1] * 5
    return Dataset(name="line", features=features, labels=labels)


def test_knn_class_counts_reference_configuration() -> None:
    """Positives at ranks 11-15 give counts (0,0,0,0,0,1,3,5)."""
    profile = knn_class_counts(line_dataset(), 0)
    assert profile.pos_counts == (0, 0, 0, 0, 0, 1, 3, 5)
    assert profile.sample_index == 0


def test_knn_class_counts_pure_neighborhood() -> None:
    """An all-majority neighborhood counts no positives."""
    features = np.arange(20, dtype=float)[:, None]
    labels = [-1] * 17 + [1] * 3
    ds = Dataset(name="pure", features=features, labels=labels)
    assert knn_class_counts(ds, 0).pos_counts == (0,) * 8


@pytest.mark.parametrize("seed", range(10))
def test_neighbor_profiles_match_full_sort(seed: int) -> None:
    """Every profile equals a brute-force sort of all distances."""
    rng = np.random.default_rng(seed)
    features = rng.normal(size=(30, 3))
    labels = np.where(rng.random(30) < 0.3, 1, -1)
    labels[:2] = (1, -1)
    ds = Dataset(name="rand", features=features, labels=labels)
    profiles = neighbor_profiles(ds)
    assert np.array_equal(profiles, brute_knn_counts(features, labels))
    for i in (0, 7, 29):
        assert knn_class_counts(ds, i).pos_counts == tuple(profiles[i])


def test_ranked_neighbors_ties_by_index() -> None:
    """Equidistant neighbors come in ascending index order."""
    features = np.array([[0.0], [1.0], [-1.0], [1.0], [2.0]])
    assert ranked_neighbors(features, 4)[0].tolist() == [1, 2, 3, 4]


def test_ranked_neighbors_excludes_self_duplicates_kept() -> None:
    """The query is never its own neighbor; duplicates still count."""
    features = np.zeros((4, 2))
    ranked = ranked_neighbors(features, 3)
    for i in range(4):
        assert i not in ranked[i]
        assert sorted(ranked[i]) == [j for j in range(4) if j != i]


def test_positive_counts_any_k() -> None:
    """Counts are available for any k up to N - 1."""
    ds = line_dataset()
    assert positive_counts(ds, 11)[0] == 1
    assert positive_counts(ds, 15)[0] == 5


def test_neighbor_queries_need_enough_samples() -> None:
    """Fewer than 16 samples cannot support 15 neighbors."""
    ds = Dataset(
        name="small",
        features=np.arange(10, dtype=float)[:, None],
        labels=[1, 1] + [-1] * 8,
    )
    with pytest.raises(DatasetError):
        neighbor_profiles(ds)
    with pytest.raises(DatasetError):
        knn_class_counts(ds, 0)
    with pytest.raises(DatasetError):
        knn_class_counts(line_dataset(), 16)


@pytest.mark.parametrize("seed", range(10))
def test_profiles_have_monotone_steps(seed: int) -> None:
    """Every row validates as a NeighborProfile, over 1000 samples."""
    rng = np.random.default_rng(100 + seed)
    features = rng.normal(size=(100, 2))
    labels = np.where(rng.random(100) < 0.4, 1, -1)
    labels[:2] = (1, -1)
    ds = Dataset(name="steps", features=features, labels=labels)
    for i, row in enumerate(neighbor_profiles(ds)):
        NeighborProfile(sample_index=i, pos_counts=tuple(int(c) for c in row))


@pytest.mark.parametrize(
    "counts",
    [
        (2, 2, 2, 2, 2, 2, 2, 2),
        (0, 3, 3, 3, 3, 3, 3, 3),
        (1, 1, 0, 0, 0, 0, 0, 0),
        (0, 0, 0),
    ],
)
def test_neighbor_profile_rejects_impossible_counts(counts) -> None:
    """Counts must start at 0 or 1 and grow by 0, 1 or 2."""
    with pytest.raises(ValidationError):
        NeighborProfile(sample_index=0, pos_counts=counts)


@pytest.mark.parametrize("seed", range(5))
def test_neighbor_profiles_relabel_symmetry(seed: int) -> None:
    """Swapping the classes turns each count c at k into k - c."""
    rng = np.random.default_rng(200 + seed)
    n = int(rng.integers(16, 60))
    features = rng.normal(size=(n, int(rng.integers(1, 4))))
    labels = np.where(rng.random(n) < 0.3, 1, -1)
    ds = Dataset(name="ds", features=features, labels=labels)
    swapped = Dataset(name="swapped", features=features, labels=-labels)

    k = np.asarray(K_GRID)
    assert np.array_equal(
        neighbor_profiles(swapped), k - neighbor_profiles(ds)
    )
