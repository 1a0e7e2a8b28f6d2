"""Dataset ingestion, normalization, imbalance metadata and splits."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger

from entropy_fsvm.app_types import Dataset, ImbalanceInfo


class DatasetError(ValueError):
    """Input data violates a precondition of the requested operation."""


def load_csv(
    path: str | Path,
    label_column: str | int,
    minority_label: str | float,
    header: bool = True,
    name: str | None = None,
) -> Dataset:
    """Load a CSV file into a `Dataset`.

    Parameters
    ----------
    path : str | Path
        comma-separated file, decimal-point reals.
    label_column : str | int
        column name, or zero-based column index.
    minority_label : str | float
        raw label value mapped to +1; every other value becomes -1.
    header : bool, optional
        whether the first row holds column names, by default True.
    name : str | None, optional
        dataset name, by default the file stem.

    Returns
    -------
    Dataset
        rows in file order.

    Raises
    ------
    FileNotFoundError
        if `path` does not exist.
    DatasetError
        on a missing label column, a non-numeric or empty feature cell, or
        a label column with a single distinct value.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)

    frame = _read_frame(path, header)
    label_key = _resolve_column(frame, label_column)
    raw_labels = frame[label_key].str.strip()
    feature_frame = frame.drop(columns=[label_key])
    if feature_frame.shape[1] == 0:
        raise DatasetError(f"{path}: no feature columns besides the label")

    features = _parse_features(feature_frame, path)

    if len(raw_labels) > 1 and raw_labels.nunique() < 2:
        msg = f"{path}: label column {label_key!r} has one distinct value"
        raise DatasetError(msg)

    labels = np.where(
        raw_labels.to_numpy() == _label_token(minority_label), 1, -1
    )
    ds = Dataset(
        name=name or path.stem, features=features, labels=labels
    )
    logger.info(
        f"loaded {ds.name}: {ds.n_samples} samples, {ds.n_features} "
        f"features, {int((labels == 1).sum())} minority"
    )
    return ds


def load_features(path: str | Path, header: bool = True) -> np.ndarray:
    """Load an unlabeled CSV file as an N x D feature matrix."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    frame = _read_frame(path, header)
    if frame.shape[1] == 0:
        raise DatasetError(f"{path}: no feature columns")
    return _parse_features(frame, path)


def _read_frame(path: Path, header: bool) -> pd.DataFrame:
    return pd.read_csv(
        path,
        header=0 if header else None,
        dtype=str,
        keep_default_na=False,
        skipinitialspace=True,
    )


def _parse_features(frame: pd.DataFrame, path: Path) -> np.ndarray:
    features = np.empty(frame.shape, dtype=np.float64)
    for col_pos, column in enumerate(frame.columns):
        cells = frame[column].str.strip()
        values = pd.to_numeric(cells, errors="coerce")
        bad = values.isna() | ~np.isfinite(values.to_numpy(dtype=float))
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            msg = (
                f"{path}: non-numeric value {cells.iloc[row]!r} "
                f"at row {row}, column {column!r}"
            )
            raise DatasetError(msg)
        features[:, col_pos] = values.to_numpy(dtype=np.float64)
    return features


def _resolve_column(frame: pd.DataFrame, label_column: str | int) -> str:
    if isinstance(label_column, str) and label_column in frame.columns:
        return label_column
    if isinstance(label_column, str) and label_column.lstrip("-").isdigit():
        label_column = int(label_column)
    width = frame.shape[1]
    if isinstance(label_column, int) and -width <= label_column < width:
        return frame.columns[label_column]
    raise DatasetError(f"label column {label_column!r} not found")


def _label_token(raw: str | float) -> str:
    """Textual form of a label as it appears in a CSV cell."""
    if isinstance(raw, float) and raw.is_integer():
        return str(int(raw))
    return str(raw).strip()


def minmax_bounds(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column minima and maxima used by `apply_minmax`."""
    x = np.asarray(features, dtype=np.float64)
    return x.min(axis=0), x.max(axis=0)


def apply_minmax(
    features: np.ndarray, lo: np.ndarray, hi: np.ndarray
) -> np.ndarray:
    """Affine map sending `lo` to -1 and `hi` to 1, column by column.

    Columns with `lo == hi` become 0. Rows outside the bounds map outside
    [-1, 1].
    """
    x = np.asarray(features, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    if x.shape[1] != lo.shape[0]:
        msg = f"{x.shape[1]} feature columns, bounds for {lo.shape[0]}"
        raise DatasetError(msg)
    span = hi - lo
    constant = span == 0
    return np.where(
        constant,
        0.0,
        2.0 * (x - lo) / np.where(constant, 1.0, span) - 1.0,
    )


def normalize_minmax(ds: Dataset) -> Dataset:
    """Map every feature column affinely onto [-1, 1].

    Constant columns become 0.
    """
    lo, hi = minmax_bounds(ds.features)
    scaled = apply_minmax(ds.features, lo, hi)
    return Dataset(name=ds.name, features=scaled, labels=ds.labels)


def imbalance_info(ds: Dataset) -> ImbalanceInfo:
    """Count both classes and compute IR = n_neg / n_pos."""
    n_pos = int((ds.labels == 1).sum())
    n_neg = int((ds.labels == -1).sum())
    if n_pos == 0 or n_neg == 0:
        raise DatasetError(f"{ds.name}: both classes must be present")
    if n_neg < n_pos:
        msg = (
            f"{ds.name}: +1 must be the minority class, "
            f"got {n_pos} positive and {n_neg} negative samples"
        )
        raise DatasetError(msg)
    return ImbalanceInfo(n_pos=n_pos, n_neg=n_neg, ir=n_neg / n_pos)


def stratified_folds(
    ds: Dataset, folds: int, seed: int
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split sample indices into `folds` class-stratified folds.

    Each class is shuffled and dealt round-robin starting at fold 0. A
    majority class at least as large as the minority class then stays at
    least as large in every training split.

    Returns
    -------
    list[tuple[np.ndarray, np.ndarray]]
        (train indices, test indices) per fold, both sorted ascending.
    """
    if folds < 2:
        raise DatasetError(f"folds must be at least 2, got {folds}")

    rng = np.random.default_rng(seed)
    assignment = np.empty(ds.n_samples, dtype=np.int64)
    for label in (1, -1):
        members = np.flatnonzero(ds.labels == label)
        if members.size < folds:
            msg = (
                f"{ds.name}: class {label:+d} has {members.size} samples, "
                f"fewer than {folds} folds"
            )
            raise DatasetError(msg)
        members = rng.permutation(members)
        assignment[members] = np.arange(members.size) % folds

    indices = np.arange(ds.n_samples)
    return [
        (indices[assignment != fold], indices[assignment == fold])
        for fold in range(folds)
    ]


def undersample_indices(ds: Dataset, seed: int) -> np.ndarray:
    """Sorted indices of every minority sample plus `n_pos` random
    majority samples."""
    info = imbalance_info(ds)
    rng = np.random.default_rng(seed)
    majority = np.flatnonzero(ds.labels == -1)
    kept = rng.choice(majority, size=info.n_pos, replace=False)
    return np.sort(np.concatenate([np.flatnonzero(ds.labels == 1), kept]))


def undersample_majority(ds: Dataset, seed: int) -> Dataset:
    """Balanced dataset: all minority and as many random majority samples."""
    return ds.subset(undersample_indices(ds, seed))
