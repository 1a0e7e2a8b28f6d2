import math

import numpy as np
import pandas as pd
import pytest
from scipy.stats import norm, rankdata

from entropy_fsvm.app_types import EvalReport
from entropy_fsvm.stats import (
    StatisticsError,
    compare_reports,
    holm_frame,
    holm_test,
    wilcoxon_against,
    wilcoxon_frame,
    wilcoxon_signed_rank,
)
from tests.utils.oracles import exact_wilcoxon_p


def signed_ranks(negative: set[int], n: int = 10) -> np.ndarray:
    return np.array([-r if r in negative else r for r in range(1, n + 1)])


def test_wilcoxon_rejects_bad_input() -> None:
    """Unpaired input and fewer than five nonzero differences fail."""
    with pytest.raises(StatisticsError):
        wilcoxon_signed_rank([1, 2, 3], [1, 2])
    with pytest.raises(StatisticsError):
        wilcoxon_signed_rank([1, 2, 3, 4, 5, 6], [1, 2, 0, 0, 0, 0])


def test_wilcoxon_all_positive_six_pairs() -> None:
    """Six positive differences: statistic 0, z = 10.5 / sqrt(22.75)."""
    result = wilcoxon_signed_rank([2, 3, 4, 5, 6, 7], [1, 1, 1, 1, 1, 1])
    z = 10.5 / math.sqrt(22.75)
    assert result.statistic == 0.0
    assert result.z == pytest.approx(z)
    assert result.p == pytest.approx(2 * norm.sf(z))


def test_wilcoxon_tie_correction() -> None:
    """Tied magnitudes share ranks and shrink the variance."""
    result = wilcoxon_signed_rank([1, 1, 1, 1, 1, -1], [0] * 6)
    variance = 22.75 - (6**3 - 6) / 48
    assert result.statistic == 3.5
    assert result.z == pytest.approx(7.0 / math.sqrt(variance))


@pytest.mark.parametrize(
    "negative, w_minus",
    [({1, 2, 3}, 6.0), ({4, 6}, 10.0), (set(), 0.0)],
)
def test_wilcoxon_close_to_exact_distribution(
    negative: set[int], w_minus: float
) -> None:
    """The normal approximation is within 0.02 of the exact p-value."""
    d = signed_ranks(negative)
    result = wilcoxon_signed_rank(d, np.zeros(10))
    stat, exact = exact_wilcoxon_p(d)
    assert result.statistic == stat == w_minus
    assert result.p == pytest.approx(exact, abs=0.02)


@pytest.mark.parametrize("seed", range(5))
def test_wilcoxon_swap_invariance(seed: int) -> None:
    """Swapping the samples keeps statistic and p and flips z."""
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=12), rng.normal(size=12)
    forward = wilcoxon_signed_rank(a, b)
    backward = wilcoxon_signed_rank(b, a)
    assert forward.statistic == backward.statistic
    assert forward.p == pytest.approx(backward.p)
    assert forward.z == pytest.approx(-backward.z)


def test_holm_equal_ranks_reject_nothing() -> None:
    """Identical ranks give z = 0, p = 0.5 for every method."""
    ranks = {m: 3.0 for m in ("svm", "usvm", "cssvm", "efsvm", "iefsvm")}
    rows = holm_test(ranks, "iefsvm", n_datasets=20)
    assert len(rows) == 4
    for row in rows:
        assert row.z == 0.0
        assert row.p == pytest.approx(0.5)
        assert not row.rejected


def test_holm_adjusted_alpha_sequence() -> None:
    """Five competitors are tested at alpha/5, alpha/4, ..., alpha."""
    ranks = {"champ": 1.0, "a": 2.0, "b": 3.0, "c": 4.0, "d": 5.0, "e": 6.0}
    rows = holm_test(ranks, "champ", n_datasets=23, alpha=0.05)
    assert [r.adjusted_alpha for r in rows] == pytest.approx(
        [0.01, 0.0125, 0.05 / 3, 0.025, 0.05]
    )
    assert [r.method for r in rows] == ["e", "d", "c", "b", "a"]


def test_holm_reference_z_value() -> None:
    """k = 6, N = 23, ranks 2.04 vs 5.52 give z close to 6.31."""
    ranks = {"champ": 2.04, "worst": 5.52, "m1": 3, "m2": 3, "m3": 3, "m4": 4}
    rows = {r.method: r for r in holm_test(ranks, "champ", n_datasets=23)}
    assert rows["worst"].z == pytest.approx(6.31, abs=0.01)
    assert rows["worst"].rejected


def test_holm_stops_at_first_retained_hypothesis() -> None:
    """A retained hypothesis retains every later one."""
    se = math.sqrt(4 * 5 / (6 * 10))
    # z values 3.0, 1.0, 2.5 before sorting
    ranks = {"champ": 1.0, "a": 1 + 3.0 * se, "b": 1 + se, "c": 1 + 2.5 * se}
    rows = holm_test(ranks, "champ", n_datasets=10)
    assert [r.method for r in rows] == ["a", "c", "b"]
    assert [r.rejected for r in rows] == [True, True, False]

    # p = 0.04 would pass alpha on its own but follows a retained row
    se = math.sqrt(3 * 4 / (6 * 10))
    ranks = {
        "champ": 1.0,
        "a": 1 + norm.isf(0.03) * se,
        "b": 1 + norm.isf(0.04) * se,
    }
    rows = holm_test(ranks, "champ", n_datasets=10)
    assert [r.p for r in rows] == pytest.approx([0.03, 0.04])
    assert not any(r.rejected for r in rows)


@pytest.mark.parametrize("seed", range(20))
def test_holm_rejections_form_a_prefix(seed: int) -> None:
    """Rejected rows precede retained ones and p grows down the table."""
    rng = np.random.default_rng(seed)
    names = ["champ"] + [f"m{i}" for i in range(5)]
    ranks = dict(zip(names, rng.uniform(1.0, 6.0, 6)))
    rows = holm_test(ranks, "champ", n_datasets=int(rng.integers(5, 40)))
    flags = [r.rejected for r in rows]
    assert flags == sorted(flags, reverse=True)
    assert all(x.p <= y.p for x, y in zip(rows, rows[1:]))


def test_holm_relabel_invariance() -> None:
    """Renaming competitors changes no statistic."""
    ranks = {"champ": 1.5, "a": 3.2, "b": 4.4, "c": 2.9}
    renamed = {"champ": 1.5, "x": 3.2, "y": 4.4, "z": 2.9}
    first = holm_test(ranks, "champ", n_datasets=15)
    second = holm_test(renamed, "champ", n_datasets=15)
    key = [(r.z, r.p, r.adjusted_alpha, r.rejected) for r in first]
    assert key == [(r.z, r.p, r.adjusted_alpha, r.rejected) for r in second]


def test_holm_worse_champion_is_not_rejected() -> None:
    """A champion ranked behind a method yields negative z for it."""
    rows = holm_test({"champ": 4.0, "a": 1.0, "b": 2.0}, "champ", 30)
    assert all(r.z < 0 and r.p > 0.5 and not r.rejected for r in rows)


def test_holm_rejects_bad_arguments() -> None:
    with pytest.raises(StatisticsError):
        holm_test({"a": 1.0, "b": 2.0}, "c", 10)
    with pytest.raises(StatisticsError):
        holm_test({"a": 1.0, "b": 2.0}, "a", 0)
    with pytest.raises(StatisticsError):
        holm_test({"a": 1.0}, "a", 10)


def test_frames_have_fixed_columns() -> None:
    rows = holm_test({"champ": 1.0, "a": 3.0}, "champ", 50)
    frame = holm_frame(rows)
    assert list(frame.columns) == [
        "method", "z", "p", "adjusted_alpha", "hypothesis"
    ]
    assert frame.loc[0, "hypothesis"] == "rejected"
    assert list(wilcoxon_frame([]).columns) == [
        "method", "statistic", "z", "p", "hypothesis"
    ]


def make_reports(
    table: dict[str, list[float]], irs: list[float]
) -> list[EvalReport]:
    return [
        EvalReport.from_runs(
            dataset=f"d{i}", method=method, ir=ir, rep_auc=[values[i]], seed=0
        )
        for i, ir in enumerate(irs)
        for method, values in table.items()
    ]


def test_compare_reports_groups_and_notices() -> None:
    """Empty IR groups are reported with a notice instead of tables."""
    reports = make_reports(
        {
            "iefsvm": [95, 94, 93, 92, 91, 90],
            "svm": [85, 84, 83, 82, 81, 80.5],
            "cssvm": [90, 89, 88, 87, 86, 85],
        },
        irs=[1.5, 2.0, 2.5, 3.0, 1.2, 1.1],
    )
    groups = {g.group: g for g in compare_reports(reports, "iefsvm")}
    assert list(groups) == ["all", "IR > 3.3", "IR <= 3.3"]

    everything = groups["all"]
    assert everything.n_datasets == 6
    assert everything.notice is None
    assert everything.holm["method"].tolist() == ["svm", "cssvm"]
    assert len(everything.wilcoxon) == 2
    assert (everything.wilcoxon["z"] > 0).all()

    assert groups["IR > 3.3"].n_datasets == 0
    assert groups["IR > 3.3"].notice == "no datasets in group"
    assert groups["IR > 3.3"].holm.empty
    assert groups["IR <= 3.3"].n_datasets == 6


def test_compare_reports_champion_only() -> None:
    """A benchmark of one method cannot be compared."""
    reports = make_reports({"iefsvm": [90, 91, 92]}, irs=[2.0, 5.0, 8.0])
    for group in compare_reports(reports, "iefsvm"):
        assert group.holm.empty and group.wilcoxon.empty
        assert group.notice is not None


def test_compare_reports_skips_wilcoxon_on_ties() -> None:
    """Too many tied datasets drop the method from the Wilcoxon table."""
    reports = make_reports(
        {
            "iefsvm": [95, 94, 93, 92, 91, 90],
            "svm": [95, 94, 93, 82, 81, 80],
            "cssvm": [90, 89, 88, 87, 86, 85],
        },
        irs=[4.0] * 6,
    )
    everything = compare_reports(reports, "iefsvm")[0]
    assert everything.wilcoxon["method"].tolist() == ["cssvm"]
    assert "skipped" in everything.notice


def test_compare_reports_unknown_champion() -> None:
    reports = make_reports({"a": [1, 2], "b": [2, 1]}, irs=[2.0, 2.0])
    with pytest.raises(StatisticsError):
        compare_reports(reports, "iefsvm")


def test_wilcoxon_against_direction() -> None:
    """Positive z means the champion scores higher."""
    scores = pd.DataFrame(
        {"champ": [0.9, 0.8, 0.85, 0.7, 0.95], "b": [0.5, 0.6, 0.7, 0.6, 0.9]}
    )
    (row,) = wilcoxon_against(scores, "champ")
    assert row.method == "b"
    assert row.z > 0
    assert row.statistic == 0.0


@pytest.mark.parametrize("seed", range(10))
def test_wilcoxon_matches_signed_rank_formula(seed: int) -> None:
    """Tied, rounded differences agree with the tie-corrected formula."""
    rng = np.random.default_rng(100 + seed)
    a = np.round(rng.normal(size=12), 1)
    b = np.round(rng.normal(size=12), 1)
    d = a - b
    d = d[d != 0]
    n = d.size

    ranks = rankdata(np.abs(d))
    w_plus = ranks[d > 0].sum()
    _, ties = np.unique(np.abs(d), return_counts=True)
    variance = n * (n + 1) * (2 * n + 1) / 24 - (ties**3 - ties).sum() / 48
    z = (w_plus - n * (n + 1) / 4) / math.sqrt(variance)

    result = wilcoxon_signed_rank(a, b)
    assert result.statistic == pytest.approx(
        min(w_plus, ranks[d < 0].sum())
    )
    assert result.z == pytest.approx(z)
    assert result.p == pytest.approx(2 * norm.sf(abs(z)))


def test_wilcoxon_rejects_missing_scores() -> None:
    """NaN scores cannot be ranked."""
    with pytest.raises(StatisticsError):
        wilcoxon_signed_rank([1, 2, 3, 4, 5, np.nan], [0] * 6)


def test_compare_reports_leaves_out_incomplete_datasets() -> None:
    """A dataset without every method is excluded from ranks and tests."""
    table = {
        "iefsvm": [95, 94, 93, 92, 91, 90],
        "svm": [85, 84, 83, 82, 81, 80.5],
        "cssvm": [90, 91, 88, 93, 86, 85],
    }
    irs = [1.5, 2.0, 2.5, 3.0, 1.2, 1.1]
    complete = make_reports(table, irs)
    extra = EvalReport.from_runs(
        dataset="d6", method="iefsvm", ir=2.2, rep_auc=[99.0], seed=0
    )

    everything = compare_reports([*complete, extra], "iefsvm")[0]
    expected = compare_reports(complete, "iefsvm")[0]
    assert everything.n_datasets == 6
    assert "d6" in everything.notice
    pd.testing.assert_frame_equal(everything.holm, expected.holm)
    pd.testing.assert_frame_equal(everything.wilcoxon, expected.wilcoxon)
    assert everything.holm["z"].notna().all()
    assert everything.wilcoxon["z"].notna().all()
