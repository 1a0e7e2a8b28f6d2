from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from entropy_fsvm import __version__
from entropy_fsvm.app_types import (
    EvalReport,
    KernelSpec,
    RunConfig,
    TrainedModel,
)
from entropy_fsvm.repositories import (
    FileRepository,
    ModelRepository,
    ReportRepository,
    TableRepository,
    build_meta,
)


def test_build_meta() -> None:
    """Meta carries version, config digest, seed and non-null extras."""
    cfg = RunConfig(seed=7)
    meta = build_meta(cfg, dataset="iris", scaling=None)
    assert meta == {
        "version": __version__,
        "config_hash": cfg.config_hash(),
        "seed": 7,
        "dataset": "iris",
    }
    assert build_meta() == {"version": __version__}


def test_config_hash_tracks_settings() -> None:
    assert RunConfig().config_hash() == RunConfig().config_hash()
    assert RunConfig().config_hash() != RunConfig(c=2.0).config_hash()


def test_table_repository_meta_lines(tmp_path: Path) -> None:
    """Tables start with `# key=value` lines that do not reach the frame."""
    repository = TableRepository(tmp_path / "out")
    frame = pd.DataFrame({"method": ["svm", "iefsvm"], "z": [0.5, -1.25]})
    path = repository.create("holm.csv", frame, {"seed": 3, "alpha": 0.05})

    lines = path.read_text().splitlines()
    assert lines[:3] == ["# seed=3", "# alpha=0.05", "method,z"]
    pd.testing.assert_frame_equal(repository.get("holm.csv"), frame)
    assert repository.get_meta("holm.csv") == {"seed": "3", "alpha": "0.05"}


def test_table_repository_missing_file(tmp_path: Path) -> None:
    with pytest.raises(FileNotFoundError):
        TableRepository(tmp_path).get("absent.csv")


def test_file_repository_absolute_paths(tmp_path: Path) -> None:
    """Absolute names bypass the repository root."""
    target = tmp_path / "elsewhere" / "doc.json"
    repository = FileRepository(tmp_path / "root")
    assert repository.create(target, {"a": [1, 2]}) == target
    assert repository.get(target) == {"a": [1, 2]}


def test_model_repository(tmp_path: Path) -> None:
    """A stored model keeps its arrays, kernel and meta."""
    model = TrainedModel(
        support_indices=np.array([0, 4]),
        alphas=np.array([0.25, 0.25]),
        support_labels=np.array([1, -1]),
        support_vectors=np.array([[0.0, 1.0], [1.0, -0.5]]),
        bias=0.125,
        kernel=KernelSpec(kind="rbf", gamma=0.5),
    )
    repository = ModelRepository(tmp_path)
    repository.create(model, {"method": "iefsvm"})
    restored, meta = repository.get()
    assert meta == {"method": "iefsvm"}
    assert restored.kernel == model.kernel
    assert restored.bias == model.bias
    assert np.array_equal(restored.support_indices, model.support_indices)
    assert np.array_equal(restored.support_vectors, model.support_vectors)


def test_report_repository(tmp_path: Path) -> None:
    """Reports survive storage including fold parameters."""
    reports = [
        EvalReport.from_runs(
            dataset="glass",
            method=method,
            ir=15.46,
            rep_auc=[90.0, 92.5],
            seed=0,
            fold_params=[{"c": 1.0, "k": 7}],
        )
        for method in ("efsvm", "iefsvm")
    ]
    repository = ReportRepository(tmp_path)
    repository.create(reports, build_meta())
    assert repository.get() == reports
