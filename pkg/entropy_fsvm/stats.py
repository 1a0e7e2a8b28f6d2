"""Wilcoxon signed-rank and Holm post hoc comparisons against a champion."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import pandas as pd
from loguru import logger
from scipy.stats import norm, wilcoxon

from entropy_fsvm.app_types import EvalReport, HolmRow, WilcoxonRow
from entropy_fsvm.evaluation import mean_auc_matrix, rank_matrix

MIN_NONZERO_PAIRS = 5


class StatisticsError(ValueError):
    """A comparison cannot be computed from the given scores."""


class SignedRankResult(NamedTuple):
    statistic: float
    z: float
    p: float


def wilcoxon_signed_rank(
    a: np.ndarray | list[float], b: np.ndarray | list[float]
) -> SignedRankResult:
    """Paired two-sided Wilcoxon signed-rank test, normal approximation.

    Zero differences are dropped and tied |differences| share average
    ranks; the variance carries the tie correction. `statistic` is
    min(W+, W-); `z` is signed so that positive means `a` above `b`.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        msg = f"paired scores expected, got {a.shape} and {b.shape}"
        raise StatisticsError(msg)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise StatisticsError("paired scores contain NaN or infinite values")

    n = int(np.count_nonzero(a - b))
    if n < MIN_NONZERO_PAIRS:
        msg = (
            f"too few nonzero differences: {n}, "
            f"at least {MIN_NONZERO_PAIRS} needed"
        )
        raise StatisticsError(msg)

    options = {
        "zero_method": "wilcox",
        "correction": False,
        "method": "approx",
    }
    two_sided = wilcoxon(a, b, **options)
    # the one-sided statistic is W+
    w_plus = float(wilcoxon(a, b, alternative="greater", **options).statistic)
    w_minus = n * (n + 1) / 2.0 - w_plus
    z = np.sign(w_plus - w_minus) * abs(float(two_sided.zstatistic))
    return SignedRankResult(
        statistic=float(two_sided.statistic),
        z=float(z),
        p=min(1.0, float(two_sided.pvalue)),
    )


def holm_test(
    avg_ranks: dict[str, float],
    champion: str,
    n_datasets: int,
    alpha: float = 0.05,
) -> list[HolmRow]:
    """Holm step-down comparison of a champion against every other method.

    z = (R_method - R_champion) / sqrt(k (k + 1) / (6 N)), so a positive z
    means the champion ranks better; p is the upper normal tail. Rows come
    back sorted by descending z, the i-th of m rows tested at
    alpha / (m - i + 1). Testing stops at the first retained hypothesis.
    """
    if champion not in avg_ranks:
        raise StatisticsError(f"unknown champion {champion!r}")
    if n_datasets < 1:
        msg = f"n_datasets must be positive, got {n_datasets}"
        raise StatisticsError(msg)
    if len(avg_ranks) < 2:
        raise StatisticsError("at least one method besides the champion")

    k = len(avg_ranks)
    se = np.sqrt(k * (k + 1) / (6.0 * n_datasets))
    best = avg_ranks[champion]
    scored = sorted(
        (
            ((rank - best) / se, method)
            for method, rank in avg_ranks.items()
            if method != champion
        ),
        key=lambda item: (-item[0], item[1]),
    )

    m = len(scored)
    rows, still_rejecting = [], True
    for i, (z, method) in enumerate(scored):
        p = float(norm.sf(z))
        adjusted = alpha / (m - i)
        still_rejecting = still_rejecting and p < adjusted
        rows.append(
            HolmRow(
                method=method,
                z=float(z),
                p=p,
                adjusted_alpha=adjusted,
                rejected=still_rejecting,
            )
        )
    return rows


def wilcoxon_against(
    scores: pd.DataFrame, champion: str, alpha: float = 0.05
) -> list[WilcoxonRow]:
    """Champion vs every other column of a datasets x methods score table.

    Methods with too few nonzero differences are logged and left out.
    """
    if champion not in scores.columns:
        raise StatisticsError(f"unknown champion {champion!r}")
    rows = []
    for method in scores.columns:
        if method == champion:
            continue
        try:
            result = wilcoxon_signed_rank(scores[champion], scores[method])
        except StatisticsError as e:
            logger.warning(f"wilcoxon {champion} vs {method} skipped: {e}")
            continue
        rows.append(
            WilcoxonRow(
                method=method,
                statistic=result.statistic,
                z=result.z,
                p=result.p,
                rejected=result.p < alpha,
            )
        )
    return rows


def _hypothesis(rejected: bool) -> str:
    return "rejected" if rejected else "not rejected"


def holm_frame(rows: list[HolmRow]) -> pd.DataFrame:
    """Holm rows as `method,z,p,adjusted_alpha,hypothesis`."""
    return pd.DataFrame(
        {
            "method": [r.method for r in rows],
            "z": [r.z for r in rows],
            "p": [r.p for r in rows],
            "adjusted_alpha": [r.adjusted_alpha for r in rows],
            "hypothesis": [_hypothesis(r.rejected) for r in rows],
        }
    )


def wilcoxon_frame(rows: list[WilcoxonRow]) -> pd.DataFrame:
    """Wilcoxon rows as `method,statistic,z,p,hypothesis`."""
    return pd.DataFrame(
        {
            "method": [r.method for r in rows],
            "statistic": [r.statistic for r in rows],
            "z": [r.z for r in rows],
            "p": [r.p for r in rows],
            "hypothesis": [_hypothesis(r.rejected) for r in rows],
        }
    )


class GroupComparison(NamedTuple):
    group: str
    n_datasets: int
    holm: pd.DataFrame
    wilcoxon: pd.DataFrame
    notice: str | None


def compare_reports(
    reports: list[EvalReport],
    champion: str,
    ir_threshold: float = 3.3,
    alpha: float = 0.05,
) -> list[GroupComparison]:
    """Holm and Wilcoxon tables over all datasets and both IR groups.

    Ranks are recomputed inside each group. Datasets without a report for
    every method are left out with a notice. A group that cannot support a
    test keeps an empty table and a notice instead.
    """
    means = mean_auc_matrix(reports)
    if champion not in means.columns:
        raise StatisticsError(f"unknown champion {champion!r}")

    groups = {
        "all": means,
        f"IR > {ir_threshold:g}": means[means["ir"] > ir_threshold],
        f"IR <= {ir_threshold:g}": means[means["ir"] <= ir_threshold],
    }
    out = []
    for name, group in groups.items():
        holm, wilcoxon, notices = holm_frame([]), wilcoxon_frame([]), []
        incomplete = group.index[group.isna().any(axis=1)]
        if len(incomplete):
            notices.append(
                f"datasets missing a method left out: "
                f"{', '.join(map(str, incomplete))}"
            )
            group = group.drop(index=incomplete)
        n = len(group)
        if n == 0:
            notices.append("no datasets in group")
        elif means.shape[1] < 3:
            notices.append("no other method to compare against")
        else:
            avg_ranks = rank_matrix(group).drop(columns=["ir"]).mean(axis=0)
            holm = holm_frame(
                holm_test(avg_ranks.to_dict(), champion, n, alpha)
            )
            scores = group.drop(columns=["ir"])
            wilcoxon = wilcoxon_frame(
                wilcoxon_against(scores, champion, alpha)
            )
            if len(wilcoxon) < scores.shape[1] - 1:
                notices.append(
                    f"wilcoxon needs {MIN_NONZERO_PAIRS} nonzero "
                    f"differences, some methods were skipped"
                )
        notice = "; ".join(notices) or None
        if notice:
            logger.warning(f"group {name!r} ({n} datasets): {notice}")
        out.append(GroupComparison(name, n, holm, wilcoxon, notice))
    return out
