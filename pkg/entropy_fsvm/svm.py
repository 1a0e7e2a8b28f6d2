"""Weighted soft-margin SVM: kernels, SMO solver and decision function."""

from __future__ import annotations

from collections import OrderedDict
from typing import Any

import numpy as np
from loguru import logger

from entropy_fsvm.app_types import (
    Dataset,
    KernelSpec,
    MembershipVector,
    SolverConfig,
    TrainedModel,
)
from entropy_fsvm.data import DatasetError

MODEL_FORMAT_VERSION = 1

# float64 cells of the difference tensor materialised per chunk
_CHUNK_CELLS = 1 << 22


class ConvergenceError(RuntimeError):
    """SMO stopped before the KKT conditions were met."""

    def __init__(self, message: str, violation: float, iterations: int):
        super().__init__(message)
        self.violation = violation
        self.iterations = iterations


def _check_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-1] != b.shape[-1]:
        msg = f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}"
        raise DatasetError(msg)


def kernel_eval(spec: KernelSpec, x: np.ndarray, z: np.ndarray) -> float:
    """K(x, z) for a single pair of feature rows."""
    x = np.asarray(x, dtype=np.float64).ravel()
    z = np.asarray(z, dtype=np.float64).ravel()
    _check_dims(x, z)
    spec = spec.resolve(x.shape[0])
    if spec.kind == "linear":
        return float(x @ z)
    diff = x - z
    return float(np.exp(-spec.gamma * (diff @ diff)))


def kernel_matrix(
    spec: KernelSpec, xs: np.ndarray, zs: np.ndarray
) -> np.ndarray:
    """Gram block K(xs[i], zs[j]) for resolved `spec`."""
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    zs = np.atleast_2d(np.asarray(zs, dtype=np.float64))
    _check_dims(xs, zs)
    if spec.kind == "linear":
        return xs @ zs.T

    out = np.empty((xs.shape[0], zs.shape[0]))
    chunk = max(1, _CHUNK_CELLS // max(1, zs.shape[0] * zs.shape[1]))
    for start in range(0, xs.shape[0], chunk):
        diff = xs[start : start + chunk, None, :] - zs[None, :, :]
        sq = np.einsum("ijk,ijk->ij", diff, diff)
        out[start : start + chunk] = np.exp(-spec.gamma * sq)
    return out


class KernelCache:
    """Least-recently-used cache of kernel rows K(x_i, X)."""

    def __init__(self, spec: KernelSpec, features: np.ndarray, rows: int):
        self._spec = spec
        self._features = features
        self._capacity = rows
        self._rows: OrderedDict[int, np.ndarray] = OrderedDict()
        if spec.kind == "linear":
            self.diagonal = np.einsum("ij,ij->i", features, features)
        else:
            self.diagonal = np.ones(features.shape[0])

    def row(self, i: int) -> np.ndarray:
        cached = self._rows.get(i)
        if cached is not None:
            self._rows.move_to_end(i)
            return cached

        row = kernel_matrix(self._spec, self._features[i], self._features)[0]
        self._rows[i] = row
        if len(self._rows) > self._capacity:
            self._rows.popitem(last=False)
        return row


def dual_objective(
    alphas: np.ndarray, labels: np.ndarray, gram: np.ndarray
) -> float:
    """Weighted SVM dual objective sum(a) - a'Qa / 2, Q = yy'K."""
    ay = alphas * labels
    return float(alphas.sum() - 0.5 * ay @ gram @ ay)


class SMOSolver:
    """SMO for the dual with per-sample boxes 0 <= a_i <= s_i C.

    Works on the equivalent minimisation of a'Qa / 2 - sum(a) subject to
    y'a = 0, with the maximal violating pair as working set.
    """

    def __init__(
        self,
        features: np.ndarray,
        labels: np.ndarray,
        upper: np.ndarray,
        kernel: KernelSpec,
        cfg: SolverConfig,
    ) -> None:
        self.y = labels.astype(np.float64)
        self.upper = upper
        self.cfg = cfg
        self.cache = KernelCache(kernel, features, cfg.cache_rows)
        self.alpha = np.zeros(labels.shape[0])
        # gradient of the minimised objective: Qa - 1
        self.grad = -np.ones(labels.shape[0])
        self.iterations = 0

    def objective(self) -> float:
        """Current dual objective, from the maintained gradient."""
        return float(0.5 * (self.alpha.sum() - self.alpha @ self.grad))

    def _select_working_set(self) -> tuple[int, int, float]:
        y, alpha, upper = self.y, self.alpha, self.upper
        score = -y * self.grad
        up = ((y > 0) & (alpha < upper)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < upper))
        if not up.any() or not low.any():
            return -1, -1, 0.0
        i = int(np.argmax(np.where(up, score, -np.inf)))
        j = int(np.argmin(np.where(low, score, np.inf)))
        return i, j, float(score[i] - score[j])

    def _update(self, i: int, j: int) -> float:
        y, alpha, grad = self.y, self.alpha, self.grad
        row_i, row_j = self.cache.row(i), self.cache.row(j)
        c_i, c_j = self.upper[i], self.upper[j]
        old_i, old_j = alpha[i], alpha[j]
        diag = self.cache.diagonal
        quad = max(diag[i] + diag[j] - 2.0 * row_i[j], 1e-12)

        if y[i] != y[j]:
            delta = (-grad[i] - grad[j]) / quad
            diff = old_i - old_j
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -diff
            if diff > c_i - c_j:
                if alpha[i] > c_i:
                    alpha[i] = c_i
                    alpha[j] = c_i - diff
            elif alpha[j] > c_j:
                alpha[j] = c_j
                alpha[i] = c_j + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            total = old_i + old_j
            alpha[i] -= delta
            alpha[j] += delta
            if total > c_i:
                if alpha[i] > c_i:
                    alpha[i] = c_i
                    alpha[j] = total - c_i
            elif alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = total
            if total > c_j:
                if alpha[j] > c_j:
                    alpha[j] = c_j
                    alpha[i] = total - c_j
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = total

        # rounding in the clipping above may leave +-1 ulp outside the box
        alpha[i] = min(max(alpha[i], 0.0), c_i)
        alpha[j] = min(max(alpha[j], 0.0), c_j)
        d_i, d_j = alpha[i] - old_i, alpha[j] - old_j
        grad += y * (y[i] * d_i * row_i + y[j] * d_j * row_j)
        return max(abs(d_i), abs(d_j))

    def solve(self) -> np.ndarray:
        """Run SMO to KKT tolerance and return the multipliers."""
        n = self.y.shape[0]
        # one pass is n pair updates
        limit = self.cfg.max_passes * n
        stalled = 0
        previous = 0.0
        while True:
            i, j, gap = self._select_working_set()
            if gap < self.cfg.tol:
                break
            if self.iterations >= limit or stalled > n:
                msg = (
                    f"SMO did not converge in {self.iterations} iterations "
                    f"({self.iterations / n:.1f} passes), "
                    f"KKT violation {gap:.3e}"
                )
                raise ConvergenceError(msg, gap, self.iterations)

            change = self._update(i, j)
            self.iterations += 1
            stalled = stalled + 1 if change < self.cfg.eps else 0

            if self.cfg.debug:
                current = self.objective()
                if current < previous - 1e-12 * max(1.0, abs(previous)):
                    msg = (
                        f"dual objective decreased at iteration "
                        f"{self.iterations}: {previous} -> {current}"
                    )
                    raise ConvergenceError(msg, gap, self.iterations)
                previous = current

        logger.debug(
            f"SMO converged after {self.iterations} iterations, "
            f"objective {self.objective():.6g}"
        )
        return self.alpha

    def bias(self) -> float:
        """Mean over free vectors, else the feasible interval midpoint."""
        y, alpha, upper = self.y, self.alpha, self.upper
        score = -y * self.grad
        free = (alpha > 0) & (alpha < upper)
        if free.any():
            return float(score[free].mean())

        # y f(x) >= 1 at zero, <= 1 at the upper bound
        lower_side = ((y > 0) & (alpha == 0)) | ((y < 0) & (alpha >= upper))
        upper_side = ((y < 0) & (alpha == 0)) | ((y > 0) & (alpha >= upper))
        lower_side &= upper > 0
        upper_side &= upper > 0
        lb = score[lower_side].max() if lower_side.any() else None
        ub = score[upper_side].min() if upper_side.any() else None
        if lb is None:
            return float(ub)
        if ub is None:
            return float(lb)
        return float((lb + ub) / 2.0)


def train_weighted_svm(
    ds: Dataset,
    s: MembershipVector,
    cfg: SolverConfig,
    kernel: KernelSpec,
) -> TrainedModel:
    """Train a fuzzy SVM whose box constraints are s_i * C.

    Parameters
    ----------
    ds : Dataset
        training samples.
    s : MembershipVector
        one membership per sample; s_i = 0 makes a sample inert.
    cfg : SolverConfig
        C and SMO settings.
    kernel : KernelSpec
        kernel; an unset rbf gamma becomes 1 / n_features.

    Returns
    -------
    TrainedModel
        support expansion and bias.

    Raises
    ------
    DatasetError
        if the memberships do not match the samples, or one class has no
        sample with positive membership.
    ConvergenceError
        if SMO does not reach the KKT tolerance.
    """
    if len(s) != ds.n_samples:
        msg = f"{len(s)} memberships for {ds.n_samples} samples"
        raise DatasetError(msg)
    active = s.s > 0
    if not (active & (ds.labels == 1)).any() or not (
        active & (ds.labels == -1)
    ).any():
        msg = f"{ds.name}: both classes need a sample with positive membership"
        raise DatasetError(msg)

    kernel = kernel.resolve(ds.n_features)
    solver = SMOSolver(ds.features, ds.labels, s.s * cfg.c, kernel, cfg)
    alpha = solver.solve()
    bias = solver.bias()

    support = np.flatnonzero(alpha > 0)
    return TrainedModel(
        support_indices=support,
        alphas=alpha[support].copy(),
        support_labels=ds.labels[support].copy(),
        support_vectors=ds.features[support].copy(),
        bias=bias,
        kernel=kernel,
    )


def decision_values(model: TrainedModel, xs: np.ndarray) -> np.ndarray:
    """sum_i a_i y_i K(x, x_i) + b for every row of `xs`."""
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    _check_dims(xs, model.support_vectors)
    if model.alphas.size == 0:
        return np.full(xs.shape[0], model.bias)
    gram = kernel_matrix(model.kernel, xs, model.support_vectors)
    return gram @ (model.alphas * model.support_labels) + model.bias


def decision_value(model: TrainedModel, x: np.ndarray) -> float:
    """Decision function at one feature row."""
    return float(decision_values(model, np.asarray(x).reshape(1, -1))[0])


def predict_many(model: TrainedModel, xs: np.ndarray) -> np.ndarray:
    """Labels for every row; a zero decision value maps to +1."""
    return np.where(decision_values(model, xs) >= 0, 1, -1)


def predict(model: TrainedModel, x: np.ndarray) -> int:
    """Label of one feature row; sign(0) = +1."""
    return 1 if decision_value(model, x) >= 0 else -1


def model_to_dict(model: TrainedModel) -> dict[str, Any]:
    """Versioned JSON-ready representation."""
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "kernel": model.kernel.model_dump(),
        "n_features": model.n_features,
        "bias": float(model.bias),
        "support_indices": model.support_indices.tolist(),
        "alphas": model.alphas.tolist(),
        "support_labels": model.support_labels.tolist(),
        "support_vectors": model.support_vectors.tolist(),
    }


def model_from_dict(payload: dict[str, Any]) -> TrainedModel:
    """Inverse of `model_to_dict`."""
    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise DatasetError(f"unsupported model format version {version!r}")
    vectors = np.asarray(payload["support_vectors"], dtype=np.float64)
    return TrainedModel(
        support_indices=np.asarray(payload["support_indices"], dtype=np.int64),
        alphas=np.asarray(payload["alphas"], dtype=np.float64),
        support_labels=np.asarray(payload["support_labels"], dtype=np.int64),
        support_vectors=vectors.reshape(-1, int(payload["n_features"])),
        bias=float(payload["bias"]),
        kernel=KernelSpec(**payload["kernel"]),
    )
