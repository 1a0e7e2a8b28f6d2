"""Nearest-neighbor entropies, profile statistics and the pattern atlas."""

from __future__ import annotations

import itertools
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from scipy.special import entr

from entropy_fsvm.app_types import K_GRID, NeighborProfile, PatternStats
from entropy_fsvm.data import DatasetError
from entropy_fsvm.repositories import TableRepository, build_meta

LEVEL_CURVE_T: tuple[float, ...] = (0.15, 0.3, 0.45, 0.6, 0.75)
ATLAS_COLUMNS = ["mu", "sigma", "d", "theta", "nonzero_count", "kind"]

_K = np.asarray(K_GRID, dtype=np.float64)


def binary_entropy(pos: int, k: int) -> float:
    """Entropy (nats) of the class split `pos` / `k - pos`."""
    if k < 1 or not 0 <= pos <= k:
        raise DatasetError(f"need 0 <= pos <= k and k >= 1, got {pos}, {k}")
    p = pos / k
    return float(entr(p) + entr(1.0 - p))


def entropy_matrix(counts: np.ndarray) -> np.ndarray:
    """Entropies of an (..., 8) array of positive counts over the k grid."""
    p = np.asarray(counts, dtype=np.float64) / _K
    return entr(p) + entr(1.0 - p)


def profile_summary(counts: np.ndarray) -> dict[str, np.ndarray]:
    """Vectorised mu, sigma, d, theta for an (N, 8) count matrix."""
    h = entropy_matrix(counts)
    mu = h.mean(axis=1)
    sigma = h.std(axis=1, ddof=1)
    return {
        "entropies": h,
        "mu": mu,
        "sigma": sigma,
        "d": np.hypot(mu, sigma),
        # arctan2(0, 0) == 0 covers the all-pure profile
        "theta": np.arctan2(mu, sigma),
        "nonzero_count": (h > 0).sum(axis=1),
    }


def pattern_stats(profile: NeighborProfile) -> PatternStats:
    """Entropy statistics of one neighbor profile."""
    counts = np.asarray(profile.pos_counts)[None, :]
    return _stats_row(profile_summary(counts), 0, profile.pos_counts)


def _stats_row(
    summary: dict[str, np.ndarray], row: int, counts: tuple[int, ...]
) -> PatternStats:
    return PatternStats(
        entropies=tuple(float(h) for h in summary["entropies"][row]),
        mu=float(summary["mu"][row]),
        sigma=float(summary["sigma"][row]),
        d=float(summary["d"][row]),
        theta=float(summary["theta"][row]),
        nonzero_count=int(summary["nonzero_count"][row]),
        pos_counts=tuple(int(c) for c in counts),
    )


def enumerate_count_sequences() -> np.ndarray:
    """All feasible positive-count sequences, lexicographically ordered.

    The first count is 0 or 1 and every later count adds 0, 1 or 2, which
    gives 2 * 3**7 sequences.
    """
    steps = itertools.product((0, 1), *[(0, 1, 2)] * (len(K_GRID) - 1))
    return np.cumsum(np.array(list(steps), dtype=np.int64), axis=1)


def enumerate_patterns() -> list[PatternStats]:
    """Statistics of every feasible entropy pattern."""
    counts = enumerate_count_sequences()
    summary = profile_summary(counts)
    return [
        _stats_row(summary, row, tuple(counts[row]))
        for row in range(counts.shape[0])
    ]


def pattern_table(patterns: list[PatternStats]) -> pd.DataFrame:
    """One row per pattern with 1-based index, counts and entropies."""
    records = []
    for i, pattern in enumerate(patterns, start=1):
        record: dict[str, float | int] = {"i": i}
        for k, count, h in zip(
            K_GRID, pattern.pos_counts or (), pattern.entropies
        ):
            record[f"pos_{k}"] = count
            record[f"h_{k}"] = h
        record.update(
            mu=pattern.mu,
            sigma=pattern.sigma,
            d=pattern.d,
            theta=pattern.theta,
            nonzero_count=pattern.nonzero_count,
        )
        records.append(record)
    return pd.DataFrame.from_records(records)


def theta_trend(patterns: list[PatternStats]) -> pd.DataFrame:
    """Mean theta and mean d per number of nonzero entropies."""
    frame = pd.DataFrame(
        {
            "nonzero_count": [p.nonzero_count for p in patterns],
            "theta": [p.theta for p in patterns],
            "d": [p.d for p in patterns],
        }
    )
    return (
        frame.groupby("nonzero_count")
        .agg(
            patterns=("theta", "size"),
            theta=("theta", "mean"),
            d=("d", "mean"),
        )
        .reset_index()
    )


def level_curve(t: float, points: int = 200, d_max: float = 1.0) -> np.ndarray:
    """Samples of the curve d * theta = t.

    Returns
    -------
    np.ndarray
        points x 4 array of (mu, sigma, d, theta), with mu = d sin(theta)
        and sigma = d cos(theta), for d <= `d_max`.
    """
    theta = np.linspace(t / d_max, np.pi / 2, points)
    d = t / theta
    return np.column_stack(
        (d * np.sin(theta), d * np.cos(theta), d, theta)
    )


def pattern_atlas(
    patterns: list[PatternStats],
    levels: tuple[float, ...] = LEVEL_CURVE_T,
    points: int = 200,
) -> pd.DataFrame:
    """Plot-ready rows: one per pattern plus sampled level curves."""
    frame = pd.DataFrame(
        {
            "mu": [p.mu for p in patterns],
            "sigma": [p.sigma for p in patterns],
            "d": [p.d for p in patterns],
            "theta": [p.theta for p in patterns],
            "nonzero_count": pd.array(
                [p.nonzero_count for p in patterns], dtype="Int64"
            ),
            "kind": "pattern",
        }
    )
    curves = []
    for t in levels:
        curve = pd.DataFrame(
            level_curve(t, points), columns=["mu", "sigma", "d", "theta"]
        )
        curve["nonzero_count"] = pd.array([pd.NA] * points, dtype="Int64")
        curve["kind"] = f"levelcurve-{t:g}"
        curves.append(curve)
    return pd.concat([frame, *curves], ignore_index=True)[ATLAS_COLUMNS]


def emit_pattern_atlas(
    patterns: list[PatternStats],
    out: str | Path,
    meta: dict[str, Any] | None = None,
) -> Path:
    """Write the pattern atlas as CSV with leading `# key=value` lines."""
    out = Path(out)
    repository = TableRepository(out.parent)
    frame = pattern_atlas(patterns)
    return repository.create(out.name, frame, meta or build_meta())
