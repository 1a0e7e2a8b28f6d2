"""Entropy fuzzy SVM toolkit. Memberships, SMO solver, benchmarks, tests."""
from __future__ import annotations

from pathlib import Path

from envyaml import EnvYAML

__version__ = "0.1.0"

DEFAULT_CONFIG = Path(__file__).resolve().parent.parent / "config.yml"


def get_config(path: str | Path | None = None) -> EnvYAML:
    """Get dict with config values."""
    if not path:
        path = DEFAULT_CONFIG

    return EnvYAML(
        yaml_file=str(path),
        env_file=".env",
        include_environment=False,
        flatten=False,
    )
