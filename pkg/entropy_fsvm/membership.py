"""Fuzzy memberships: EFSVM, IEFSVM and the cost-sensitive weighting."""

from __future__ import annotations

import numpy as np
import pandas as pd
from loguru import logger
from scipy.special import entr

from entropy_fsvm.app_types import (
    Dataset,
    KernelSpec,
    MembershipVector,
    SolverConfig,
)
from entropy_fsvm.data import DatasetError, imbalance_info, stratified_folds
from entropy_fsvm.entropy import profile_summary
from entropy_fsvm.neighbors import MAX_K, neighbor_profiles, positive_counts
from entropy_fsvm.svm import predict_many, train_weighted_svm

# the grid of the original EFSVM procedure, without k = 1 and k = 3
EFSVM_ALGORITHM_GRID: tuple[int, ...] = (5, 7, 9, 11, 13, 15)


def _check_k(ds: Dataset, k: int) -> None:
    if k % 2 == 0 or not 1 <= k <= MAX_K:
        raise DatasetError(f"k must be odd and within 1..{MAX_K}, got {k}")
    if ds.n_samples < k + 1:
        msg = f"{ds.name}: {ds.n_samples} samples, {k + 1} needed for k={k}"
        raise DatasetError(msg)


def cost_sensitive_membership(ds: Dataset) -> MembershipVector:
    """1 for the minority class, 1 / IR for the majority class."""
    ir = imbalance_info(ds).ir
    return MembershipVector(s=np.where(ds.labels == 1, 1.0, 1.0 / ir))


def efsvm_membership(ds: Dataset, k: int) -> MembershipVector:
    """EFSVM weights: majority samples get (1 - H_i) / IR at one k."""
    _check_k(ds, k)
    ir = imbalance_info(ds).ir
    p = positive_counts(ds, k) / k
    h = entr(p) + entr(1.0 - p)
    return MembershipVector(s=np.where(ds.labels == 1, 1.0, (1.0 - h) / ir))


def efsvm_select_k(
    ds: Dataset,
    k_grid: tuple[int, ...] | list[int],
    cfg: SolverConfig,
    kernel: KernelSpec,
    seed: int,
    folds: int = 5,
) -> int:
    """Pick the k with the lowest cross-validated misclassification error.

    Memberships are computed on every training fold only. Ties go to the
    smaller k.

    Parameters
    ----------
    ds : Dataset
        training data.
    k_grid : tuple[int, ...] | list[int]
        odd candidate neighborhood sizes.
    cfg : SolverConfig
        solver settings, including C.
    kernel : KernelSpec
        kernel used for every fit.
    seed : int
        fold seed; every k sees the same folds.
    folds : int, optional
        number of CV folds, by default 5.

    Returns
    -------
    int
        the selected k.
    """
    grid = sorted(k_grid)
    if not grid:
        raise DatasetError("k grid must not be empty")
    if len(grid) == 1:
        return grid[0]

    splits = stratified_folds(ds, folds, seed)
    errors: dict[int, float] = {}
    for k in grid:
        fold_errors = []
        for train_idx, test_idx in splits:
            train, test = ds.subset(train_idx), ds.subset(test_idx)
            model = train_weighted_svm(
                train, efsvm_membership(train, k), cfg, kernel
            )
            predicted = predict_many(model, test.features)
            fold_errors.append(float(np.mean(predicted != test.labels)))
        errors[k] = float(np.mean(fold_errors))
        logger.debug(f"{ds.name}: efsvm k={k} cv error {errors[k]:.4f}")

    best_error = min(errors.values())
    tied = [k for k in grid if errors[k] == best_error]
    if len(tied) > 1:
        logger.warning(
            f"{ds.name}: efsvm k candidates {tied} tie at cv error "
            f"{best_error:.4f}, using k={tied[0]}"
        )
    return tied[0]


def iefsvm_membership(ds: Dataset) -> MembershipVector:
    """IEFSVM weights from the polar summary of the full entropy profile.

    With g_i = d_i * theta_i, majority samples get
    (1 - (g_i - min g) / (max g - min g)) / IR, where min and max run over
    all samples. A constant g leaves every majority sample at 1 / IR.
    """
    ir = imbalance_info(ds).ir
    summary = profile_summary(neighbor_profiles(ds))
    g = summary["d"] * summary["theta"]
    lo, hi = g.min(), g.max()
    scaled = (g - lo) / (hi - lo) if hi > lo else np.zeros_like(g)
    return MembershipVector(
        s=np.where(ds.labels == 1, 1.0, (1.0 - scaled) / ir)
    )


def method_membership(
    ds: Dataset, method: str, k: int | None = None
) -> MembershipVector:
    """Membership vector of a weighting method on its training data."""
    match method:
        case "svm" | "usvm":
            return MembershipVector(s=np.ones(ds.n_samples))
        case "cssvm":
            return cost_sensitive_membership(ds)
        case "efsvm":
            if k is None:
                raise DatasetError("efsvm needs a neighborhood size k")
            return efsvm_membership(ds, k)
        case "iefsvm":
            return iefsvm_membership(ds)
    raise DatasetError(f"unknown method {method!r}")


def membership_audit(ds: Dataset, s: MembershipVector) -> pd.DataFrame:
    """Per-sample table `index,label,mu,sigma,d,theta,g,s`."""
    frame = pd.DataFrame(
        {"index": np.arange(ds.n_samples), "label": ds.labels}
    )
    if ds.n_samples > MAX_K:
        summary = profile_summary(neighbor_profiles(ds))
        for column in ("mu", "sigma", "d", "theta"):
            frame[column] = summary[column]
        frame["g"] = summary["d"] * summary["theta"]
    else:
        for column in ("mu", "sigma", "d", "theta", "g"):
            frame[column] = np.nan
    frame["s"] = s.s
    return frame
