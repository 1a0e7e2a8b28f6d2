"""AUC scoring, the repeated cross-validation protocol and rank tables."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

import numpy as np
import pandas as pd
from loguru import logger
from scipy.stats import rankdata

from entropy_fsvm.app_types import (
    Dataset,
    EvalReport,
    RunConfig,
    TrainedModel,
)
from entropy_fsvm.data import (
    DatasetError,
    imbalance_info,
    stratified_folds,
    undersample_majority,
)
from entropy_fsvm.membership import efsvm_select_k, method_membership
from entropy_fsvm.svm import predict_many, train_weighted_svm


def derive_seed(*keys: int) -> int:
    """Independent 32-bit seed for a tuple of integer keys."""
    state = np.random.SeedSequence([int(key) for key in keys])
    return int(state.generate_state(1)[0])


def auc(pred_labels: np.ndarray, true_labels: np.ndarray) -> float:
    """Single operating point AUC: (1 + TP_rate - FP_rate) / 2.

    Computed from hard labels, so it equals balanced accuracy rather than
    the area under a ranked ROC curve.
    """
    pred = np.asarray(pred_labels)
    true = np.asarray(true_labels)
    if pred.shape != true.shape:
        raise DatasetError(f"length mismatch: {pred.shape} vs {true.shape}")
    positives = true == 1
    negatives = true == -1
    if not positives.any() or not negatives.any():
        raise DatasetError("true labels must contain both classes")
    tp_rate = float(np.mean(pred[positives] == 1))
    fp_rate = float(np.mean(pred[negatives] == 1))
    return (1.0 + tp_rate - fp_rate) / 2.0


def fit_method(
    train: Dataset,
    method: str,
    cfg: RunConfig,
    c: float,
    k: int | None,
    seed: int,
) -> TrainedModel:
    """Train one weighting method at fixed hyperparameters."""
    if method == "usvm":
        train = undersample_majority(train, seed)
    s = method_membership(train, method, k=k)
    return train_weighted_svm(train, s, cfg.solver_for(c), cfg.kernel)


def cv_auc(
    ds: Dataset,
    method: str,
    cfg: RunConfig,
    c: float,
    k: int | None,
    seed: int,
) -> float:
    """Mean test-fold AUC of a stratified CV at fixed hyperparameters."""
    scores = []
    for fold, (train_idx, test_idx) in enumerate(
        stratified_folds(ds, cfg.folds, seed)
    ):
        model = fit_method(
            ds.subset(train_idx), method, cfg, c, k, derive_seed(seed, fold)
        )
        test = ds.subset(test_idx)
        scores.append(auc(predict_many(model, test.features), test.labels))
    return float(np.mean(scores))


def tune_hyperparameters(
    ds: Dataset, method: str, cfg: RunConfig, seed: int
) -> dict[str, float]:
    """Select C (by CV AUC) and, for EFSVM, k (by CV error).

    EFSVM first fixes k with the configured C, then tunes C at that k.
    Ties keep the earlier grid value.
    """
    params: dict[str, float] = {}
    k = None
    if method == "efsvm":
        k = cfg.k if cfg.k is not None else efsvm_select_k(
            ds, cfg.k_grid, cfg.solver_for(cfg.c), cfg.kernel, seed, cfg.folds
        )
        params["k"] = k

    if len(cfg.c_grid) == 1:
        params["c"] = cfg.c_grid[0]
        return params

    best_c, best_auc = cfg.c_grid[0], -np.inf
    for c in cfg.c_grid:
        score = cv_auc(ds, method, cfg, c, k, seed)
        if score > best_auc:
            best_c, best_auc = c, score
    params["c"] = best_c
    return params


class ExperimentResult(NamedTuple):
    auc: float
    fold_auc: list[float]
    fold_params: list[dict[str, float]]
    # wall clock of tuning and fitting, prediction excluded
    fit_seconds: float = 0.0


def run_experiment_detailed(
    ds: Dataset, method: str, cfg: RunConfig, seed: int
) -> ExperimentResult:
    """One stratified CV with nested tuning on every training split."""
    fold_auc, fold_params, fit_seconds = [], [], 0.0
    for fold, (train_idx, test_idx) in enumerate(
        stratified_folds(ds, cfg.folds, seed)
    ):
        train, test = ds.subset(train_idx), ds.subset(test_idx)
        fold_seed = derive_seed(seed, fold)
        started = time.perf_counter()
        params = tune_hyperparameters(train, method, cfg, fold_seed)
        k = int(params["k"]) if "k" in params else None
        model = fit_method(train, method, cfg, params["c"], k, fold_seed)
        fit_seconds += time.perf_counter() - started
        fold_auc.append(
            auc(predict_many(model, test.features), test.labels)
        )
        fold_params.append(params)
    return ExperimentResult(
        auc=float(np.mean(fold_auc)),
        fold_auc=fold_auc,
        fold_params=fold_params,
        fit_seconds=fit_seconds,
    )


def run_experiment(
    ds: Dataset, method: str, cfg: RunConfig, seed: int
) -> float:
    """Mean held-out AUC of one tuned cross-validation run."""
    return run_experiment_detailed(ds, method, cfg, seed).auc


class BenchmarkResult(NamedTuple):
    reports: list[EvalReport]
    auc_table: pd.DataFrame
    rank_table: pd.DataFrame
    timings: pd.DataFrame


def run_benchmark(
    datasets: list[Dataset],
    methods: list[str],
    cfg: RunConfig,
    reps: int | None = None,
    seed: int | None = None,
) -> BenchmarkResult:
    """Repeat tuned CV experiments for every (dataset, method) pair.

    Every method sees the same folds in a given repetition. Tasks fan out
    to `cfg.workers` threads; results are gathered in submission order.

    Parameters
    ----------
    datasets : list[Dataset]
        already normalised datasets.
    methods : list[str]
        weighting methods to compare.
    cfg : RunConfig
        protocol settings.
    reps : int | None, optional
        experiments per pair, by default `cfg.reps`.
    seed : int | None, optional
        base seed, by default `cfg.seed`.

    Returns
    -------
    BenchmarkResult
        per-pair reports, the mean AUC table, the rank table and the
        tuning plus fitting time of every experiment.
    """
    reps = cfg.reps if reps is None else reps
    seed = cfg.seed if seed is None else seed
    if reps < 1:
        raise DatasetError(f"reps must be at least 1, got {reps}")

    tasks = [
        (ds, method, rep)
        for ds in datasets
        for method in methods
        for rep in range(reps)
    ]

    def _run(task: tuple[Dataset, str, int]) -> ExperimentResult:
        ds, method, rep = task
        result = run_experiment_detailed(
            ds, method, cfg, derive_seed(seed, rep)
        )
        logger.info(
            f"{ds.name} / {method} / rep {rep}: AUC {100 * result.auc:.2f}"
        )
        return result

    with ThreadPoolExecutor(max_workers=cfg.workers) as executor:
        results = list(executor.map(_run, tasks))

    reports = []
    for start in range(0, len(tasks), reps):
        ds, method, _ = tasks[start]
        chunk = results[start : start + reps]
        reports.append(
            EvalReport.from_runs(
                dataset=ds.name,
                method=method,
                ir=imbalance_info(ds).ir,
                rep_auc=[100.0 * r.auc for r in chunk],
                seed=seed,
                fold_params=[p for r in chunk for p in r.fold_params],
            )
        )
    timings = pd.DataFrame(
        [
            (ds.name, method, rep, result.fit_seconds)
            for (ds, method, rep), result in zip(tasks, results)
        ],
        columns=["dataset", "method", "rep", "fit_seconds"],
    )
    return BenchmarkResult(
        reports=reports,
        auc_table=auc_table(reports, methods, cfg.ir_threshold),
        rank_table=rank_table(reports, methods, cfg.ir_threshold),
        timings=timings,
    )


def mean_auc_matrix(
    reports: list[EvalReport], methods: list[str] | None = None
) -> pd.DataFrame:
    """Datasets x methods matrix of mean AUC, plus an `ir` column."""
    frame = pd.DataFrame(
        [(r.dataset, r.ir, r.method, r.mean_auc) for r in reports],
        columns=["dataset", "ir", "method", "mean_auc"],
    )
    matrix = frame.pivot(index="dataset", columns="method", values="mean_auc")
    order = list(dict.fromkeys(frame["dataset"]))
    matrix = matrix.loc[order]
    if methods is not None:
        matrix = matrix[list(methods)]
    matrix.columns.name = None
    matrix.insert(0, "ir", frame.groupby("dataset")["ir"].first().loc[order])
    return matrix


def rank_matrix(means: pd.DataFrame) -> pd.DataFrame:
    """Per-dataset ranks, 1 = highest mean AUC, ties share average ranks."""
    values = means.drop(columns=["ir"]).to_numpy(dtype=np.float64)
    ranks = rankdata(-values, method="average", axis=1)
    out = pd.DataFrame(
        ranks, index=means.index, columns=means.columns.drop("ir")
    )
    out.insert(0, "ir", means["ir"])
    return out


def _footers(
    body: pd.DataFrame, ir_threshold: float, label: str
) -> pd.DataFrame:
    groups = {
        f"{label} (all)": body["ir"] > -np.inf,
        f"{label} (IR > {ir_threshold:g})": body["ir"] > ir_threshold,
        f"{label} (IR <= {ir_threshold:g})": body["ir"] <= ir_threshold,
    }
    rows = {}
    for name, mask in groups.items():
        row = body.loc[mask].drop(columns=["ir"]).mean(axis=0)
        row["ir"] = np.nan
        rows[name] = row
    return pd.DataFrame.from_dict(rows, orient="index")[body.columns]


def rank_table(
    reports: list[EvalReport],
    methods: list[str] | None = None,
    ir_threshold: float = 3.3,
) -> pd.DataFrame:
    """Ranks per dataset with average-rank footer rows."""
    ranks = rank_matrix(mean_auc_matrix(reports, methods))
    table = pd.concat([ranks, _footers(ranks, ir_threshold, "average rank")])
    table.index.name = "dataset"
    return table.reset_index()


def auc_table(
    reports: list[EvalReport],
    methods: list[str] | None = None,
    ir_threshold: float = 3.3,
) -> pd.DataFrame:
    """`mean+-std` AUC per dataset and method, with average footers."""
    frame = pd.DataFrame(
        [(r.dataset, r.ir, r.method, r.mean_auc, r.std_auc) for r in reports],
        columns=["dataset", "ir", "method", "mean_auc", "std_auc"],
    )
    order = list(dict.fromkeys(frame["dataset"]))
    columns = list(methods) if methods else list(
        dict.fromkeys(frame["method"])
    )
    means = frame.pivot(index="dataset", columns="method", values="mean_auc")
    stds = frame.pivot(index="dataset", columns="method", values="std_auc")
    means, stds = means.loc[order, columns], stds.loc[order, columns]
    ir = frame.groupby("dataset")["ir"].first().loc[order]
    means.insert(0, "ir", ir)
    stds.insert(0, "ir", ir)
    means = pd.concat([means, _footers(means, ir_threshold, "average AUC")])
    stds = pd.concat([stds, _footers(stds, ir_threshold, "average AUC")])

    cells = means[columns].combine(
        stds[columns],
        lambda m, s: m.map("{:.2f}".format) + "+-" + s.map("{:.2f}".format),
    )
    cells = cells.where(means[columns].notna(), "")
    cells.insert(0, "ir", means["ir"])
    cells.index.name = "dataset"
    return cells.reset_index()
