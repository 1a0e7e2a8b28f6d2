from __future__ import annotations

import json
from abc import ABC, abstractmethod
from io import StringIO
from pathlib import Path
from typing import Any

import pandas as pd
from loguru import logger

from entropy_fsvm import __version__
from entropy_fsvm.app_types import EvalReport, RunConfig, TrainedModel
from entropy_fsvm.svm import model_from_dict, model_to_dict

_META_PREFIX = "# "


def build_meta(cfg: RunConfig | None = None, **extra: Any) -> dict[str, Any]:
    """Provenance written with every output file."""
    meta: dict[str, Any] = {"version": __version__}
    if cfg is not None:
        meta["config_hash"] = cfg.config_hash()
        meta["seed"] = cfg.seed
    meta.update({k: v for k, v in extra.items() if v is not None})
    return meta


class AbstractRepository(ABC):
    """Abstract storage repository."""

    @abstractmethod
    def get(self, *args: Any, **kwargs: Any) -> Any:
        """Get entity from repository."""
        raise NotImplementedError

    @abstractmethod
    def create(self, *args: Any, **kwargs: Any) -> Any:
        """Create entity in repository."""
        raise NotImplementedError


class FileRepository(AbstractRepository):
    """Repository of CSV and JSON files under one directory."""

    def __init__(self, root: str | Path) -> None:
        self._root = Path(root)
        super().__init__()

    def _path(self, name: str | Path) -> Path:
        path = Path(name)
        return path if path.is_absolute() else self._root / path

    def _write_csv(
        self, name: str | Path, frame: pd.DataFrame, meta: dict[str, Any]
    ) -> Path:
        path = self._path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as f:
            for key, value in meta.items():
                f.write(f"{_META_PREFIX}{key}={value}\n")
            frame.to_csv(f, index=False)
        logger.info(f"wrote {len(frame)} rows to {path}")
        return path

    def _read_csv(
        self, name: str | Path
    ) -> tuple[pd.DataFrame, dict[str, str]]:
        path = self._path(name)
        if not path.exists():
            raise FileNotFoundError(path)
        meta, body = {}, []
        with path.open() as f:
            for line in f:
                if line.startswith(_META_PREFIX) and not body:
                    entry = line[len(_META_PREFIX) :].rstrip("\n")
                    key, _, value = entry.partition("=")
                    meta[key] = value
                else:
                    body.append(line)
        return pd.read_csv(StringIO("".join(body))), meta

    def _write_json(self, name: str | Path, payload: dict[str, Any]) -> Path:
        path = self._path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=2))
        logger.info(f"wrote {path}")
        return path

    def _read_json(self, name: str | Path) -> dict[str, Any]:
        path = self._path(name)
        if not path.exists():
            raise FileNotFoundError(path)
        return json.loads(path.read_text())

    def get(self, name: str | Path) -> Any:
        """Get entity from repository."""
        return self._read_json(name)

    def create(self, name: str | Path, payload: dict[str, Any]) -> Path:
        """Create entity in repository."""
        return self._write_json(name, payload)


class ModelRepository(FileRepository):
    """Trained models as JSON documents with a `meta` object."""

    def create(
        self,
        model: TrainedModel,
        meta: dict[str, Any],
        name: str | Path = "model.json",
    ) -> Path:
        """Create model file in repository, return its path."""
        payload = {"meta": meta, "model": model_to_dict(model)}
        return super().create(name, payload)

    def get(
        self, name: str | Path = "model.json"
    ) -> tuple[TrainedModel, dict]:
        """Get model and its meta from repository."""
        payload = super().get(name)
        return model_from_dict(payload["model"]), payload.get("meta", {})


class ReportRepository(FileRepository):
    """Benchmark reports as one JSON document."""

    def create(
        self,
        reports: list[EvalReport],
        meta: dict[str, Any],
        name: str | Path = "reports.json",
    ) -> Path:
        """Create reports file in repository, return its path."""
        payload = {
            "meta": meta,
            "reports": [report.model_dump(mode="json") for report in reports],
        }
        return super().create(name, payload)

    def get(self, name: str | Path = "reports.json") -> list[EvalReport]:
        """Get reports from repository."""
        payload = super().get(name)
        return [EvalReport(**report) for report in payload["reports"]]


class TableRepository(FileRepository):
    """Tabular outputs: pattern atlas, memberships, rank and test tables."""

    def create(
        self, name: str | Path, frame: pd.DataFrame, meta: dict[str, Any]
    ) -> Path:
        """Create CSV table in repository, return its path."""
        return self._write_csv(name, frame, meta)

    def get(self, name: str | Path) -> pd.DataFrame:
        """Get table from repository, without its meta lines."""
        frame, _ = self._read_csv(name)
        return frame

    def get_meta(self, name: str | Path) -> dict[str, str]:
        """Get the `key=value` meta lines of a table."""
        _, meta = self._read_csv(name)
        return meta
