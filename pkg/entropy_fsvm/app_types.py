from __future__ import annotations

import hashlib
import json
from typing import Annotated, Any, Literal, TypeAlias

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    field_validator,
    model_validator,
)

NULL: TypeAlias = None

K_GRID: tuple[int, ...] = (1, 3, 5, 7, 9, 11, 13, 15)
C_GRID: tuple[float, ...] = tuple(2.0**e for e in range(-6, 7, 2))
METHODS: tuple[str, ...] = ("svm", "usvm", "cssvm", "efsvm", "iefsvm")

Method: TypeAlias = Literal["svm", "usvm", "cssvm", "efsvm", "iefsvm"]


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True)


class _ArrayModel(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class Dataset(_ArrayModel):
    """Feature matrix with +1 (minority) / -1 (majority) labels."""

    name: str
    features: np.ndarray
    labels: np.ndarray

    @field_validator("features", mode="before")
    @classmethod
    def _as_matrix(cls, value: Any) -> np.ndarray:
        arr = np.array(value, dtype=np.float64, ndmin=2)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("features must be a non-empty N x D matrix")
        if not np.all(np.isfinite(arr)):
            raise ValueError("features contain NaN or infinite values")
        arr.setflags(write=False)
        return arr

    @field_validator("labels", mode="before")
    @classmethod
    def _as_labels(cls, value: Any) -> np.ndarray:
        arr = np.array(value, dtype=np.int64).ravel()
        if not np.all(np.isin(arr, (-1, 1))):
            raise ValueError("every label must be exactly +1 or -1")
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _same_length(self) -> Dataset:
        if self.features.shape[0] != self.labels.shape[0]:
            msg = (
                f"{self.features.shape[0]} feature rows but "
                f"{self.labels.shape[0]} labels"
            )
            raise ValueError(msg)
        return self

    @property
    def n_samples(self) -> int:
        return int(self.labels.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])

    def subset(self, indices: np.ndarray | list[int]) -> Dataset:
        """Dataset restricted to `indices`, in that order."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            name=self.name,
            features=self.features[idx],
            labels=self.labels[idx],
        )


class ImbalanceInfo(_Frozen):
    """Class counts and imbalance ratio n_neg / n_pos."""

    n_pos: int = Field(gt=0)
    n_neg: int = Field(gt=0)
    ir: float = Field(ge=1.0)

    @model_validator(mode="after")
    def _ratio(self) -> ImbalanceInfo:
        if self.ir != self.n_neg / self.n_pos:
            raise ValueError("ir must equal n_neg / n_pos")
        return self


class NeighborProfile(_Frozen):
    """Positive-neighbor counts among the 1, 3, ..., 15 nearest neighbors."""

    sample_index: int = Field(ge=0)
    pos_counts: tuple[int, ...]

    @field_validator("pos_counts")
    @classmethod
    def _monotone_steps(cls, counts: tuple[int, ...]) -> tuple[int, ...]:
        if len(counts) != len(K_GRID):
            raise ValueError(f"expected {len(K_GRID)} counts, got {counts}")
        if not 0 <= counts[0] <= 1:
            raise ValueError(f"first count must be 0 or 1, got {counts}")
        for j in range(1, len(counts)):
            if counts[j] - counts[j - 1] not in (0, 1, 2):
                raise ValueError(f"count steps must be 0, 1 or 2: {counts}")
        return counts


class PatternStats(_Frozen):
    """Summary of one entropy profile in (mu, sigma) and polar (d, theta)."""

    entropies: tuple[float, ...]
    mu: float
    sigma: float = Field(ge=0.0)
    d: float = Field(ge=0.0)
    theta: float = Field(ge=0.0, le=np.pi / 2)
    nonzero_count: int = 0
    pos_counts: tuple[int, ...] | NULL = NULL

    @property
    def g(self) -> float:
        return self.d * self.theta


class MembershipVector(_ArrayModel):
    """Per-sample fuzzy weights s_i in [0, 1]."""

    s: np.ndarray

    @field_validator("s", mode="before")
    @classmethod
    def _in_unit_interval(cls, value: Any) -> np.ndarray:
        arr = np.array(value, dtype=np.float64).ravel()
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValueError("memberships must lie in [0, 1]")
        arr.setflags(write=False)
        return arr

    def __len__(self) -> int:
        return int(self.s.shape[0])


class KernelSpec(_Frozen):
    """Kernel choice. `gamma=None` resolves to 1 / n_features."""

    kind: Literal["linear", "rbf"] = "rbf"
    gamma: Annotated[float, Field(gt=0.0)] | NULL = NULL

    def resolve(self, n_features: int) -> KernelSpec:
        if self.kind == "rbf" and self.gamma is None:
            return KernelSpec(kind="rbf", gamma=1.0 / n_features)
        return self


class SolverConfig(_Frozen):
    """SMO settings."""

    c: float = Field(default=1.0, gt=0.0)
    tol: float = Field(default=1e-3, gt=0.0)
    # sweeps over the samples; the pair-update cap is max_passes * n
    max_passes: int = Field(default=100_000, gt=0)
    eps: float = Field(default=1e-8, gt=0.0)
    cache_rows: int = Field(default=1024, gt=0)
    debug: bool = False


class TrainedModel(_ArrayModel):
    """Support expansion of a trained weighted SVM."""

    support_indices: np.ndarray
    alphas: np.ndarray
    support_labels: np.ndarray
    support_vectors: np.ndarray
    bias: float
    kernel: KernelSpec

    @property
    def n_features(self) -> int:
        return int(self.support_vectors.shape[1])


class EvalReport(_Frozen):
    """Per (dataset, method) AUC summary over repeated experiments."""

    dataset: str
    method: str
    ir: float
    rep_auc: tuple[float, ...]
    mean_auc: float
    std_auc: float
    seed: int
    fold_params: tuple[dict[str, float], ...] = ()

    @field_validator("rep_auc")
    @classmethod
    def _percent(cls, values: tuple[float, ...]) -> tuple[float, ...]:
        if not values:
            raise ValueError("rep_auc must not be empty")
        if any(v < 0.0 or v > 100.0 for v in values):
            raise ValueError("AUC values are percentages in [0, 100]")
        return values

    @classmethod
    def from_runs(
        cls,
        dataset: str,
        method: str,
        ir: float,
        rep_auc: list[float],
        seed: int,
        fold_params: list[dict[str, float]] | None = None,
    ) -> EvalReport:
        values = np.asarray(rep_auc, dtype=np.float64)
        std = float(values.std(ddof=1)) if values.size > 1 else 0.0
        return cls(
            dataset=dataset,
            method=method,
            ir=ir,
            rep_auc=tuple(float(v) for v in values),
            mean_auc=float(values.mean()),
            std_auc=std,
            seed=seed,
            fold_params=tuple(fold_params or ()),
        )


class HolmRow(_Frozen):
    """One comparison of the Holm step-down procedure."""

    method: str
    z: float
    p: float = Field(ge=0.0, le=1.0)
    adjusted_alpha: float
    rejected: bool


class WilcoxonRow(_Frozen):
    """Champion vs one method over per-dataset scores."""

    method: str
    statistic: float
    z: float
    p: float = Field(ge=0.0, le=1.0)
    rejected: bool


class RunConfig(_Frozen):
    """Free parameters of one toolkit invocation."""

    method: Method = "iefsvm"
    kernel: KernelSpec = KernelSpec()
    c: float = Field(default=1.0, gt=0.0)
    k: int | NULL = NULL
    c_grid: tuple[float, ...] = C_GRID
    k_grid: tuple[int, ...] = K_GRID
    folds: int = Field(default=5, ge=2)
    reps: int = Field(default=20, ge=1)
    seed: int = 0
    ir_threshold: float = 3.3
    normalize: bool = True
    workers: int = Field(default=1, ge=1)
    solver: SolverConfig = SolverConfig()

    @field_validator("c_grid", "k_grid")
    @classmethod
    def _nonempty(cls, grid: tuple) -> tuple:
        if not grid:
            raise ValueError("grids must be nonempty")
        return grid

    @field_validator("k_grid")
    @classmethod
    def _odd(cls, grid: tuple[int, ...]) -> tuple[int, ...]:
        if any(k % 2 == 0 or not 1 <= k <= 15 for k in grid):
            raise ValueError(f"k grid must hold odd values in 1..15: {grid}")
        return grid

    def solver_for(self, c: float) -> SolverConfig:
        return self.solver.model_copy(update={"c": c})

    def config_hash(self) -> str:
        """Short stable digest of the configuration."""
        payload = json.dumps(
            dump_without_null(self), sort_keys=True, default=str
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def dump_without_null(model_type: BaseModel) -> dict:
    """Dump type values without null."""
    obj = model_type.model_dump(mode="json")
    for field_name in type(model_type).model_fields:
        if getattr(model_type, field_name) == NULL:
            del obj[field_name]
    return obj
