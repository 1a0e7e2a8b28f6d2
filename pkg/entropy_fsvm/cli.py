"""Command-line entry point: patterns | train | predict | bench | compare."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import ValidationError

from entropy_fsvm import DEFAULT_CONFIG, get_config
from entropy_fsvm.app_types import METHODS, Dataset, RunConfig
from entropy_fsvm.data import (
    apply_minmax,
    load_csv,
    load_features,
    minmax_bounds,
    undersample_indices,
)
from entropy_fsvm.entropy import (
    emit_pattern_atlas,
    enumerate_patterns,
    pattern_table,
    theta_trend,
)
from entropy_fsvm.evaluation import auc, run_benchmark, tune_hyperparameters
from entropy_fsvm.membership import membership_audit, method_membership
from entropy_fsvm.repositories import (
    FileRepository,
    ModelRepository,
    ReportRepository,
    TableRepository,
    build_meta,
)
from entropy_fsvm.stats import compare_reports
from entropy_fsvm.svm import decision_values, train_weighted_svm

EXIT_OK, EXIT_ERROR, EXIT_CONFIG = 0, 1, 2

# experiment keys a flag may override, flag dest -> config key
_FLAG_KEYS = {
    "method": "method",
    "c": "c",
    "k": "k",
    "c_grid": "c_grid",
    "k_grid": "k_grid",
    "folds": "folds",
    "reps": "reps",
    "seed": "seed",
    "ir_threshold": "ir_threshold",
    "normalize": "normalize",
    "workers": "workers",
}


def _config_sections(path: str | Path | None) -> dict[str, dict]:
    if path is None:
        return {}
    env = get_config(path)
    return {
        section: dict(env.get(section, None) or {})
        for section in ("experiment", "solver", "logging")
    }


def load_settings(
    args: argparse.Namespace,
) -> tuple[RunConfig, dict[str, Any]]:
    """RunConfig and logging settings from defaults, files and flags.

    Later sources win: built-in defaults, `config.yml`, `--config FILE`,
    command-line flags.
    """
    experiment: dict[str, Any] = {}
    solver: dict[str, Any] = {}
    logging: dict[str, Any] = {"level": "INFO", "rotation": "1 day"}

    sources = [DEFAULT_CONFIG if DEFAULT_CONFIG.exists() else None]
    if getattr(args, "config", None):
        if not Path(args.config).exists():
            raise FileNotFoundError(args.config)
        sources.append(args.config)
    for source in sources:
        sections = _config_sections(source)
        experiment.update(sections.get("experiment", {}))
        solver.update(sections.get("solver", {}))
        logging.update(sections.get("logging", {}))

    for dest, key in _FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            experiment[key] = value
    if getattr(args, "c", None) is not None:
        experiment["c_grid"] = [args.c]
    for dest in ("kernel", "gamma"):
        if getattr(args, dest, None) is not None:
            experiment[dest] = getattr(args, dest)

    # `kernel: rbf` plus `gamma`, or a full mapping as stored in model meta
    kernel = experiment.pop("kernel", "rbf")
    kernel = dict(kernel) if isinstance(kernel, dict) else {"kind": kernel}
    if experiment.get("gamma") is not None:
        kernel["gamma"] = experiment["gamma"]
    experiment.pop("gamma", None)

    cfg = RunConfig.model_validate(
        {**experiment, "kernel": kernel, "solver": solver}
    )
    return cfg, logging


def setup_logging(settings: dict[str, Any], log_dir: Path | None) -> None:
    logger.remove()
    logger.add(sys.stderr, level=settings["level"])
    if log_dir is not None:
        log_dir.mkdir(parents=True, exist_ok=True)
        logger.add(
            log_dir / "entropy_fsvm_{time}.log",
            level=settings["level"],
            rotation=settings["rotation"],
        )


def _load_dataset(
    path: str, args: argparse.Namespace, cfg: RunConfig
) -> tuple[Dataset, dict[str, list[float]] | None]:
    ds = load_csv(
        path,
        label_column=args.label_col,
        minority_label=args.minority_label,
        header=args.header,
    )
    if not cfg.normalize:
        return ds, None
    lo, hi = minmax_bounds(ds.features)
    scaled = Dataset(
        name=ds.name,
        features=apply_minmax(ds.features, lo, hi),
        labels=ds.labels,
    )
    return scaled, {"lo": lo.tolist(), "hi": hi.tolist()}


def cmd_patterns(args: argparse.Namespace, cfg: RunConfig) -> None:
    """Enumerate every entropy pattern and write the atlas and tables."""
    out_dir = Path(args.out_dir)
    patterns = enumerate_patterns()
    meta = build_meta(cfg)
    emit_pattern_atlas(patterns, out_dir / "pattern_atlas.csv", meta)
    tables = TableRepository(out_dir)
    tables.create("pattern_table.csv", pattern_table(patterns), meta)
    tables.create("theta_trend.csv", theta_trend(patterns), meta)
    logger.info(f"{len(patterns)} patterns written to {out_dir}")


def cmd_train(args: argparse.Namespace, cfg: RunConfig) -> None:
    """Train the configured method on a whole dataset."""
    out_dir = Path(args.out_dir)
    ds, scaling = _load_dataset(args.data[0], args, cfg)
    params = tune_hyperparameters(ds, cfg.method, cfg, cfg.seed)
    k = int(params["k"]) if "k" in params else None

    rows = np.arange(ds.n_samples)
    train = ds
    if cfg.method == "usvm":
        rows = undersample_indices(ds, cfg.seed)
        train = ds.subset(rows)
    s = method_membership(train, cfg.method, k=k)
    solver = cfg.solver_for(params["c"])
    model = train_weighted_svm(train, s, solver, cfg.kernel)
    # support indices refer to rows of the input file
    model = model.model_copy(
        update={"support_indices": rows[model.support_indices]}
    )
    logger.info(
        f"{ds.name}: trained {cfg.method} with {params}, "
        f"{model.alphas.size} support vectors"
    )

    meta = build_meta(
        cfg,
        dataset=ds.name,
        method=cfg.method,
        params=params,
        scaling=scaling,
        config=cfg.model_dump(mode="json"),
    )
    ModelRepository(out_dir).create(model, meta)

    if args.dump_memberships:
        audit = membership_audit(train, s)
        audit["index"] = rows
        csv_meta = build_meta(cfg, dataset=ds.name, method=cfg.method)
        TableRepository(out_dir).create("memberships.csv", audit, csv_meta)


def cmd_predict(args: argparse.Namespace, cfg: RunConfig) -> None:
    """Decision values and labels of a stored model on new data."""
    out_dir = Path(args.out_dir)
    model_path = Path(args.model)
    model, model_meta = ModelRepository(model_path.parent).get(
        model_path.name
    )
    path = args.data[0]

    labels = None
    if args.label_col is not None:
        ds = load_csv(
            path,
            label_column=args.label_col,
            minority_label=args.minority_label,
            header=args.header,
        )
        features, labels = ds.features, ds.labels
    else:
        features = load_features(path, header=args.header)

    scaling = model_meta.get("scaling")
    if scaling:
        features = apply_minmax(features, scaling["lo"], scaling["hi"])

    values = decision_values(model, features)
    frame = pd.DataFrame(
        {
            "index": np.arange(values.shape[0]),
            "decision_value": values,
            "prediction": np.where(values >= 0, 1, -1),
        }
    )
    if labels is not None:
        frame["label"] = labels
        if np.unique(labels).size == 2:
            score = auc(frame["prediction"].to_numpy(), labels)
            logger.info(f"{Path(path).stem}: AUC {100 * score:.2f}")
        else:
            logger.warning(f"{path}: one class only, AUC not computed")

    meta = build_meta(
        cfg,
        model=model_path.name,
        model_config_hash=model_meta.get("config_hash"),
    )
    TableRepository(out_dir).create("predictions.csv", frame, meta)


def cmd_bench(args: argparse.Namespace, cfg: RunConfig) -> None:
    """Repeated cross-validation of every method on every dataset."""
    out_dir = Path(args.out_dir)
    datasets = [_load_dataset(path, args, cfg)[0] for path in args.data]
    names = [ds.name for ds in datasets]
    if len(set(names)) != len(names):
        raise ValueError(f"dataset names must be unique: {names}")

    methods = args.methods or list(METHODS)
    result = run_benchmark(datasets, methods, cfg)

    meta = build_meta(cfg)
    ReportRepository(out_dir).create(result.reports, meta)
    summary = pd.DataFrame(
        [
            {
                "dataset": r.dataset,
                "method": r.method,
                "ir": r.ir,
                "mean_auc": r.mean_auc,
                "std_auc": r.std_auc,
                "reps": len(r.rep_auc),
            }
            for r in result.reports
        ]
    )
    tables = TableRepository(out_dir)
    tables.create("reports.csv", summary, meta)
    tables.create("auc_table.csv", result.auc_table, meta)
    tables.create("rank_table.csv", result.rank_table, meta)
    # wall-clock times differ between runs, unlike the other outputs
    tables.create("timings.csv", result.timings, meta)


def cmd_compare(args: argparse.Namespace, cfg: RunConfig) -> None:
    """Holm and Wilcoxon tests of a champion against the other methods."""
    out_dir = Path(args.out_dir)
    reports = []
    for raw in args.reports:
        path = Path(raw)
        reports.extend(ReportRepository(path.parent).get(path.name))

    groups = compare_reports(
        reports, args.champion, cfg.ir_threshold, args.alpha
    )
    holm = pd.concat(
        [g.holm.assign(group=g.group) for g in groups], ignore_index=True
    )
    wilcoxon = pd.concat(
        [g.wilcoxon.assign(group=g.group) for g in groups],
        ignore_index=True,
    )
    holm = holm[["group", *holm.columns.drop("group")]]
    wilcoxon = wilcoxon[["group", *wilcoxon.columns.drop("group")]]

    meta = build_meta(cfg, champion=args.champion, alpha=args.alpha)
    tables = TableRepository(out_dir)
    tables.create("holm.csv", holm, meta)
    tables.create("wilcoxon.csv", wilcoxon, meta)
    FileRepository(out_dir).create(
        "comparison.json",
        {
            "meta": meta,
            "groups": [
                {
                    "group": g.group,
                    "n_datasets": g.n_datasets,
                    "notice": g.notice,
                    "holm": g.holm.to_dict(orient="records"),
                    "wilcoxon": g.wilcoxon.to_dict(orient="records"),
                }
                for g in groups
            ],
        },
    )
    for g in groups:
        if g.notice:
            print(f"{g.group}: {g.notice}")


def _float_list(raw: str) -> list[float]:
    return [float(v) for v in raw.split(",") if v.strip()]


def _int_list(raw: str) -> list[int]:
    return [int(v) for v in raw.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entropy-fsvm",
        description="Entropy-based fuzzy SVMs for imbalanced data.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config overriding config.yml")
    common.add_argument("--out-dir", default=".", help="output directory")
    common.add_argument(
        "--log-file",
        action="store_true",
        help="also log to <out-dir>/entropy_fsvm_{time}.log",
    )
    common.add_argument("--seed", type=int)
    common.add_argument("--ir-threshold", type=float)

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", nargs="+", required=True, help="CSV files")
    data.add_argument("--label-col", default="-1")
    data.add_argument("--minority-label", default="1")
    data.add_argument(
        "--header", action=argparse.BooleanOptionalAction, default=True
    )
    data.add_argument(
        "--normalize", action=argparse.BooleanOptionalAction, default=None
    )

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--method", choices=METHODS)
    model.add_argument("--kernel", choices=("linear", "rbf"))
    model.add_argument("--gamma", type=float)
    model.add_argument("--c", type=float, help="fixed C, skips C tuning")
    model.add_argument("--k", type=int, help="fixed EFSVM k")
    model.add_argument("--c-grid", type=_float_list, help="e.g. 0.25,1,4")
    model.add_argument("--k-grid", type=_int_list, help="e.g. 5,7,9")
    model.add_argument("--folds", type=int)
    model.add_argument("--workers", type=int)

    patterns = subparsers.add_parser(
        "patterns", parents=[common], help="write the pattern atlas"
    )
    patterns.set_defaults(handler=cmd_patterns)

    train = subparsers.add_parser(
        "train", parents=[common, data, model], help="train one model"
    )
    train.add_argument(
        "--dump-memberships",
        action="store_true",
        help="write memberships.csv next to the model",
    )
    train.set_defaults(handler=cmd_train)

    predict = subparsers.add_parser(
        "predict", parents=[common], help="score data with a stored model"
    )
    predict.add_argument("--model", required=True, help="model JSON file")
    predict.add_argument("--data", nargs=1, required=True, help="CSV file")
    predict.add_argument(
        "--label-col", help="label column, enables AUC reporting"
    )
    predict.add_argument("--minority-label", default="1")
    predict.add_argument(
        "--header", action=argparse.BooleanOptionalAction, default=True
    )
    predict.set_defaults(handler=cmd_predict)

    bench = subparsers.add_parser(
        "bench",
        parents=[common, data, model],
        help="repeated cross-validation benchmark",
    )
    bench.add_argument("--methods", nargs="+", choices=METHODS)
    bench.add_argument("--reps", type=int)
    bench.set_defaults(handler=cmd_bench)

    compare = subparsers.add_parser(
        "compare", parents=[common], help="Holm and Wilcoxon tests"
    )
    compare.add_argument(
        "--reports", nargs="+", required=True, help="reports.json files"
    )
    compare.add_argument("--champion", default="iefsvm")
    compare.add_argument("--alpha", type=float, default=0.05)
    compare.set_defaults(handler=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    """Run one subcommand; returns the process exit status."""
    args = build_parser().parse_args(argv)
    try:
        cfg, log_settings = load_settings(args)
    except ValidationError as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        print(f"FileNotFoundError: {e}", file=sys.stderr)
        return EXIT_CONFIG

    setup_logging(
        log_settings, Path(args.out_dir) if args.log_file else None
    )
    try:
        args.handler(args, cfg)
    except Exception as e:
        logger.exception(f"{args.command} failed")
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
