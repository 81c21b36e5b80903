"""Adaptive linear classifier trained by primal hinge-loss SGD.

The model minimizes the regularized soft-margin objective

    J(w, b) = (C/2) ||w||^2 + (1/N) sum_i max(0, 1 - y_i (w . x_i + b))

by per-sample stochastic subgradient steps.  Positive samples map to
y = +1, negative to y = -1.  The bias is not regularized.  The learning
rate follows an inverse-time schedule over the global step counter t:

    eta_t = lr0 / (1 + t / lr_t0)

which continues across incremental updates (no reset), so a model fitted
in batch keeps decaying as stream chunks arrive.  Weights start at zero;
a zero model therefore scores every balanced batch at objective exactly 1.

Checkpoint format (little-endian)::

    magic 'SHWM' | version u32 | dim u32 | step_count u64
    | C f64 | lr0 f64 | lr_t0 f64 | b f64 | dim x f64 weights
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ._rng import SplitMix64
from .errors import DataError, FormatError, NumericalError

CHECKPOINT_MAGIC = b"SHWM"
CHECKPOINT_VERSION = 1

DEFAULT_REG = 1e-4
DEFAULT_LR0 = 1e-2


def _as_batch(X: np.ndarray, y: np.ndarray, dim: int) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != dim:
        raise DataError(f"batch has shape {X.shape}, expected (*, {dim})")
    if y.shape != (X.shape[0],):
        raise DataError(f"labels have shape {y.shape}, expected ({X.shape[0]},)")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise DataError("labels must be +1 or -1")
    return X, y


class LinearSgdModel:
    """Linear decision function w . x + b with incremental SGD training.

    Updates are strictly sequential; scoring a model that is not being
    updated is safe from any number of threads.  Use :meth:`clone` to freeze
    a snapshot before concurrent scoring.
    """

    def __init__(
        self,
        dim: int,
        reg: float = DEFAULT_REG,
        lr0: float = DEFAULT_LR0,
        lr_t0: float | None = None,
    ) -> None:
        if dim < 1:
            raise DataError("dim must be >= 1")
        if reg <= 0 or lr0 <= 0 or (lr_t0 is not None and lr_t0 <= 0):
            raise DataError("reg, lr0 and lr_t0 must be positive")
        self.dim = dim
        self.reg = float(reg)
        self.lr0 = float(lr0)
        self.lr_t0 = None if lr_t0 is None else float(lr_t0)
        self.w = np.zeros(dim, dtype=np.float64)
        self.b = 0.0
        self.step_count = 0

    def clone(self) -> "LinearSgdModel":
        dup = LinearSgdModel(self.dim, self.reg, self.lr0, self.lr_t0)
        dup.w = self.w.copy()
        dup.b = self.b
        dup.step_count = self.step_count
        return dup

    # -- scoring ---------------------------------------------------------

    def decision(self, dvec: np.ndarray) -> float:
        """Signed distance-like score; higher means more genuine."""
        x = np.asarray(dvec, dtype=np.float64)
        if x.shape != (self.dim,):
            raise DataError(f"vector has shape {x.shape}, expected ({self.dim},)")
        return float(self.w @ x + self.b)

    def decision_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise DataError(f"batch has shape {X.shape}, expected (*, {self.dim})")
        return X @ self.w + self.b

    # -- objective -------------------------------------------------------

    def objective(self, X: np.ndarray, y: np.ndarray) -> float:
        """Regularized mean hinge loss of the batch under current parameters."""
        X, y = _as_batch(X, y, self.dim)
        if X.shape[0] == 0:
            raise DataError("objective needs a non-empty batch")
        margins = y * (X @ self.w + self.b)
        hinge = np.maximum(0.0, 1.0 - margins)
        return float(0.5 * self.reg * (self.w @ self.w) + hinge.mean())

    def objective_gradient(self, X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
        """Analytic (d/dw, d/db) of :meth:`objective` away from hinge kinks."""
        X, y = _as_batch(X, y, self.dim)
        if X.shape[0] == 0:
            raise DataError("gradient needs a non-empty batch")
        margins = y * (X @ self.w + self.b)
        violating = margins < 1.0
        n = X.shape[0]
        gw = self.reg * self.w - (y[violating] @ X[violating]) / n
        gb = -float(y[violating].sum()) / n
        return gw, gb

    # -- training --------------------------------------------------------

    def _ensure_schedule(self, n: int) -> None:
        if self.lr_t0 is None:
            self.lr_t0 = 10.0 * n

    def _sgd_pass(self, X: np.ndarray, y: np.ndarray, order: np.ndarray) -> None:
        for i in order:
            eta = self.lr0 / (1.0 + self.step_count / self.lr_t0)
            margin = y[i] * (self.w @ X[i] + self.b)
            if margin < 1.0:
                self.w -= eta * (self.reg * self.w - y[i] * X[i])
                self.b += eta * y[i]
            else:
                self.w -= eta * self.reg * self.w
            self.step_count += 1
        if not (np.all(np.isfinite(self.w)) and np.isfinite(self.b)):
            raise NumericalError(
                f"non-finite parameters after step {self.step_count}; "
                f"lr0={self.lr0} is too large for this data"
            )

    def fit_batch(
        self,
        X: np.ndarray,
        y: np.ndarray,
        epochs: int,
        seed: int = 0,
        shuffle: bool = True,
    ) -> "LinearSgdModel":
        """Run `epochs` passes of per-sample SGD. Returns self.

        Deterministic given the seed. epochs = 0 leaves the model unchanged.
        """
        X, y = _as_batch(X, y, self.dim)
        if epochs < 0:
            raise DataError("epochs must be >= 0")
        if X.shape[0] == 0:
            return self
        self._ensure_schedule(X.shape[0])
        rng = SplitMix64(seed)
        for _ in range(epochs):
            order = np.arange(X.shape[0])
            if shuffle:
                idx = list(range(X.shape[0]))
                rng.shuffle(idx)
                order = np.array(idx)
            self._sgd_pass(X, y, order)
        return self

    def partial_fit(
        self,
        X: np.ndarray,
        y: np.ndarray,
        seed: int = 0,
        shuffle: bool = True,
    ) -> "LinearSgdModel":
        """One pass over the batch, continuing the global step schedule."""
        X, y = _as_batch(X, y, self.dim)
        if X.shape[0] == 0:
            return self
        self._ensure_schedule(X.shape[0])
        order = np.arange(X.shape[0])
        if shuffle:
            idx = list(range(X.shape[0]))
            SplitMix64(seed).shuffle(idx)
            order = np.array(idx)
        self._sgd_pass(X, y, order)
        return self

    # -- persistence -----------------------------------------------------

    def save(self, path: str | Path) -> None:
        if self.lr_t0 is None:
            raise DataError("cannot checkpoint before the schedule is set (fit first)")
        out = bytearray()
        out += CHECKPOINT_MAGIC
        out += struct.pack(
            "<IIQdddd",
            CHECKPOINT_VERSION,
            self.dim,
            self.step_count,
            self.reg,
            self.lr0,
            self.lr_t0,
            self.b,
        )
        out += self.w.astype("<f8").tobytes()
        Path(path).write_bytes(bytes(out))

    @classmethod
    def load(cls, path: str | Path) -> "LinearSgdModel":
        blob = Path(path).read_bytes()
        header = 4 + struct.calcsize("<IIQdddd")
        if len(blob) < header or blob[:4] != CHECKPOINT_MAGIC:
            raise FormatError(f"{path}: not a linear model checkpoint")
        version, dim, steps, reg, lr0, lr_t0, b = struct.unpack_from("<IIQdddd", blob, 4)
        if version != CHECKPOINT_VERSION:
            raise FormatError(f"{path}: unsupported checkpoint version {version}")
        if len(blob) != header + 8 * dim:
            raise FormatError(f"{path}: truncated weight block")
        model = cls(dim, reg=reg, lr0=lr0, lr_t0=lr_t0)
        model.w = np.frombuffer(blob, dtype="<f8", count=dim, offset=header).copy()
        model.b = b
        model.step_count = steps
        if not (np.all(np.isfinite(model.w)) and np.isfinite(model.b)):
            raise FormatError(f"{path}: non-finite parameters")
        return model
