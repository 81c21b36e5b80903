"""Static soft-margin RBF-SVM baseline trained by sequential minimal optimization.

The solver is Platt's SMO (Platt 1998): pairwise coordinate ascent on the
dual with box constraints 0 <= alpha_i <= C and the equality constraint
sum alpha_i y_i = 0.  Pair selection follows the first-violator heuristic
with alternating full and non-bound passes; the second index maximizes
|E_i - E_j| over the non-bound set, with the usual fallback sweeps from a
seeded random start.

Kernel rows are served through a memory-bounded LRU cache (default budget
256 MB) since a full Gram matrix of a large development set does not fit.

The trained model is immutable and safe to score concurrently.  Its role in
the stream protocol is static: fitted once on the development set, never
updated.

Checkpoint format (little-endian)::

    magic 'SHKM' | version u32 | dim u32 | sv_count u32
    | gamma f64 | C f64 | b f64
    | per support vector: alpha_y f64, dim x f32 components
"""

from __future__ import annotations

import struct
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._rng import SplitMix64
from .errors import DataError, FormatError, NumericalError

CHECKPOINT_MAGIC = b"SHKM"
CHECKPOINT_VERSION = 1

DEFAULT_C = 1.0
DEFAULT_GAMMA = 2.0 ** -11
DEFAULT_TOL = 1e-3
DEFAULT_CACHE_BYTES = 256 * 1024 * 1024

# Below this relative change an alpha update is treated as no progress.
_STEP_EPS = 1e-10
# Alphas within this of a box bound are classified as at-bound for KKT checks.
_BOUND_EPS = 1e-9


def rbf(x1: np.ndarray, x2: np.ndarray, gamma: float) -> float:
    """exp(-gamma * ||x1 - x2||^2)."""
    if gamma <= 0:
        raise DataError("gamma must be positive")
    a = np.asarray(x1, dtype=np.float64)
    b = np.asarray(x2, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError(f"dimension mismatch: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.exp(-gamma * (d @ d)))


def _cross_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    """Kernel block between row sets A (m, k) and B (n, k)."""
    a2 = np.sum(A * A, axis=1)[:, None]
    b2 = np.sum(B * B, axis=1)[None, :]
    d2 = np.maximum(a2 + b2 - 2.0 * (A @ B.T), 0.0)
    return np.exp(-gamma * d2)


class KernelRowCache:
    """LRU cache of Gram-matrix rows under a byte budget.

    One row of an N-sample problem costs 8N bytes; the cache keeps the most
    recently touched rows up to the budget and always admits at least one.
    """

    def __init__(self, X: np.ndarray, gamma: float, budget_bytes: int = DEFAULT_CACHE_BYTES):
        self._X = X
        self._gamma = gamma
        row_bytes = 8 * X.shape[0]
        self.capacity = max(1, int(budget_bytes) // max(1, row_bytes))
        self._rows: OrderedDict[int, np.ndarray] = OrderedDict()
        self.hits = 0
        self.misses = 0

    def row(self, i: int) -> np.ndarray:
        cached = self._rows.get(i)
        if cached is not None:
            self._rows.move_to_end(i)
            self.hits += 1
            return cached
        self.misses += 1
        diff = self._X - self._X[i]
        row = np.exp(-self._gamma * np.sum(diff * diff, axis=1))
        self._rows[i] = row
        if len(self._rows) > self.capacity:
            self._rows.popitem(last=False)
        return row

    def __len__(self) -> int:
        return len(self._rows)


class KernelModel:
    """Trained kernel expansion: sum_i (alpha_i y_i) k(sv_i, x) + b."""

    def __init__(
        self,
        support_vectors: np.ndarray,
        alpha_y: np.ndarray,
        b: float,
        gamma: float,
        C: float,
    ) -> None:
        sv = np.asarray(support_vectors, dtype=np.float64)
        ay = np.asarray(alpha_y, dtype=np.float64)
        if sv.ndim != 2 and sv.size != 0:
            raise DataError("support vectors must form a 2-D array")
        if sv.size == 0:
            sv = sv.reshape(0, 0)
        if ay.shape != (sv.shape[0],):
            raise DataError("alpha_y length must match support vector count")
        if gamma <= 0 or C <= 0:
            raise DataError("gamma and C must be positive")
        self.support_vectors = sv
        self.alpha_y = ay
        self.b = float(b)
        self.gamma = float(gamma)
        self.C = float(C)

    @property
    def dim(self) -> int:
        return int(self.support_vectors.shape[1]) if self.support_vectors.size else 0

    def decision_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise DataError("decision_batch expects a 2-D array")
        if self.support_vectors.shape[0] == 0:
            return np.full(X.shape[0], self.b)
        if X.shape[1] != self.support_vectors.shape[1]:
            raise DataError(
                f"vectors have dim {X.shape[1]}, model expects {self.support_vectors.shape[1]}"
            )
        K = _cross_kernel(X, self.support_vectors, self.gamma)
        return K @ self.alpha_y + self.b

    def decision(self, dvec: np.ndarray) -> float:
        x = np.asarray(dvec, dtype=np.float64)
        if x.ndim != 1:
            raise DataError("decision expects a 1-D vector")
        return float(self.decision_batch(x[None, :])[0])

    def save(self, path: str | Path) -> None:
        out = bytearray()
        out += CHECKPOINT_MAGIC
        out += struct.pack(
            "<IIIddd",
            CHECKPOINT_VERSION,
            self.dim,
            self.support_vectors.shape[0],
            self.gamma,
            self.C,
            self.b,
        )
        for ay, sv in zip(self.alpha_y, self.support_vectors):
            out += struct.pack("<d", float(ay))
            out += sv.astype("<f4").tobytes()
        Path(path).write_bytes(bytes(out))

    @classmethod
    def load(cls, path: str | Path) -> "KernelModel":
        blob = Path(path).read_bytes()
        header = 4 + struct.calcsize("<IIIddd")
        if len(blob) < header or blob[:4] != CHECKPOINT_MAGIC:
            raise FormatError(f"{path}: not a kernel model checkpoint")
        version, dim, count, gamma, C, b = struct.unpack_from("<IIIddd", blob, 4)
        if version != CHECKPOINT_VERSION:
            raise FormatError(f"{path}: unsupported checkpoint version {version}")
        sv_bytes = 8 + 4 * dim
        if len(blob) != header + count * sv_bytes:
            raise FormatError(f"{path}: truncated support vector block")
        alpha_y = np.empty(count)
        svs = np.empty((count, dim))
        offset = header
        for i in range(count):
            (alpha_y[i],) = struct.unpack_from("<d", blob, offset)
            svs[i] = np.frombuffer(blob, dtype="<f4", count=dim, offset=offset + 8)
            offset += sv_bytes
        return cls(svs, alpha_y, b, gamma, C)


@dataclass
class SmoSolution:
    """Full solver state kept for audits; :meth:`to_model` truncates to SVs."""

    X: np.ndarray
    y: np.ndarray
    alphas: np.ndarray
    b: float
    gamma: float
    C: float
    converged: bool
    passes: int
    objective_trace: list[float] = field(default_factory=list)

    def dual_objective(self) -> float:
        return dual_objective(self.alphas, self.y, self.X, self.gamma)

    def kkt_violations(self, tol: float) -> list[str]:
        return kkt_violations(
            self.X, self.y, self.alphas, self.b, self.gamma, self.C, tol
        )

    def to_model(self) -> KernelModel:
        keep = self.alphas > 0.0
        return KernelModel(
            self.X[keep], self.alphas[keep] * self.y[keep], self.b, self.gamma, self.C
        )


def dual_objective(
    alphas: np.ndarray, y: np.ndarray, X: np.ndarray, gamma: float
) -> float:
    """W(alpha) = sum alpha - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij."""
    K = _cross_kernel(X, X, gamma)
    v = alphas * y
    return float(alphas.sum() - 0.5 * (v @ K @ v))


def kkt_violations(
    X: np.ndarray,
    y: np.ndarray,
    alphas: np.ndarray,
    b: float,
    gamma: float,
    C: float,
    tol: float,
) -> list[str]:
    """Karush-Kuhn-Tucker audit over every training point.

    alpha = 0   requires y f(x) >= 1 - tol
    0 < a < C   requires |y f(x) - 1| <= tol
    alpha = C   requires y f(x) <= 1 + tol
    plus sum alpha_i y_i = 0 within 1e-8.
    """
    f = _cross_kernel(X, X, gamma) @ (alphas * y) + b
    yf = y * f
    problems: list[str] = []
    balance = float(alphas @ y)
    if abs(balance) > 1e-8:
        problems.append(f"sum alpha_i y_i = {balance:.3e} exceeds 1e-8")
    for i, (a, m) in enumerate(zip(alphas, yf)):
        if a < -_BOUND_EPS or a > C + _BOUND_EPS:
            problems.append(f"alpha[{i}] = {a} outside [0, {C}]")
        elif a <= _BOUND_EPS:
            if m < 1.0 - tol:
                problems.append(f"alpha[{i}] = 0 but y f = {m:.6f} < 1 - tol")
        elif a >= C - _BOUND_EPS:
            if m > 1.0 + tol:
                problems.append(f"alpha[{i}] = C but y f = {m:.6f} > 1 + tol")
        else:
            if abs(m - 1.0) > tol:
                problems.append(f"alpha[{i}] interior but |y f - 1| = {abs(m - 1.0):.6f} > tol")
    return problems


class _SmoState:
    def __init__(self, X, y, C, gamma, tol, cache_bytes, seed):
        self.X = X
        self.y = y
        self.C = C
        self.tol = tol
        self.alphas = np.zeros(X.shape[0])
        self.b = 0.0
        self.errors = -y.astype(np.float64).copy()  # f = 0 initially
        self.cache = KernelRowCache(X, gamma, cache_bytes)
        self.rng = SplitMix64(seed)

    def nonbound_indices(self) -> np.ndarray:
        return np.nonzero((self.alphas > 0.0) & (self.alphas < self.C))[0]

    def take_step(self, i1: int, i2: int) -> bool:
        if i1 == i2:
            return False
        a1_old, a2_old = self.alphas[i1], self.alphas[i2]
        y1, y2 = self.y[i1], self.y[i2]
        e1, e2 = self.errors[i1], self.errors[i2]
        s = y1 * y2
        if s < 0:
            lo = max(0.0, a2_old - a1_old)
            hi = min(self.C, self.C + a2_old - a1_old)
        else:
            lo = max(0.0, a2_old + a1_old - self.C)
            hi = min(self.C, a2_old + a1_old)
        if lo >= hi:
            return False

        row1 = self.cache.row(i1)
        row2 = self.cache.row(i2)
        k11, k12, k22 = row1[i1], row1[i2], row2[i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > 0.0:
            a2 = a2_old + y2 * (e1 - e2) / eta
            a2 = min(max(a2, lo), hi)
        else:
            # Objective at the segment ends (Platt's degenerate-eta branch).
            f1 = y1 * (e1 + self.b) - a1_old * k11 - s * a2_old * k12
            f2 = y2 * (e2 + self.b) - s * a1_old * k12 - a2_old * k22
            l1 = a1_old + s * (a2_old - lo)
            h1 = a1_old + s * (a2_old - hi)
            obj_lo = (
                l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11 + 0.5 * lo * lo * k22
                + s * lo * l1 * k12
            )
            obj_hi = (
                h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11 + 0.5 * hi * hi * k22
                + s * hi * h1 * k12
            )
            if obj_lo < obj_hi - _STEP_EPS:
                a2 = lo
            elif obj_hi < obj_lo - _STEP_EPS:
                a2 = hi
            else:
                a2 = a2_old
        if abs(a2 - a2_old) < _STEP_EPS * (a2 + a2_old + _STEP_EPS):
            return False
        a1 = a1_old + s * (a2_old - a2)
        if a1 < 0.0:
            a2 += s * a1
            a1 = 0.0
        elif a1 > self.C:
            a2 += s * (a1 - self.C)
            a1 = self.C

        d1 = y1 * (a1 - a1_old)
        d2 = y2 * (a2 - a2_old)
        b1 = self.b - e1 - d1 * k11 - d2 * k12
        b2 = self.b - e2 - d1 * k12 - d2 * k22
        if 0.0 < a1 < self.C:
            b_new = b1
        elif 0.0 < a2 < self.C:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)

        self.errors += d1 * row1 + d2 * row2 + (b_new - self.b)
        self.alphas[i1] = a1
        self.alphas[i2] = a2
        self.b = b_new
        return True

    def examine(self, i2: int) -> bool:
        y2 = self.y[i2]
        a2 = self.alphas[i2]
        r2 = self.errors[i2] * y2
        if not ((r2 < -self.tol and a2 < self.C) or (r2 > self.tol and a2 > 0.0)):
            return False
        nonbound = self.nonbound_indices()
        if nonbound.size > 1:
            gaps = np.abs(self.errors[nonbound] - self.errors[i2])
            i1 = int(nonbound[int(np.argmax(gaps))])
            if self.take_step(i1, i2):
                return True
        if nonbound.size > 0:
            start = self.rng.randrange(nonbound.size)
            for k in range(nonbound.size):
                i1 = int(nonbound[(start + k) % nonbound.size])
                if self.take_step(i1, i2):
                    return True
        n = self.X.shape[0]
        start = self.rng.randrange(n)
        for k in range(n):
            i1 = (start + k) % n
            if self.take_step(i1, i2):
                return True
        return False


def smo_solve(
    X: np.ndarray,
    y: np.ndarray,
    C: float = DEFAULT_C,
    gamma: float = DEFAULT_GAMMA,
    tol: float = DEFAULT_TOL,
    max_passes: int | None = None,
    seed: int = 0,
    cache_bytes: int = DEFAULT_CACHE_BYTES,
    record_objective: bool = False,
) -> SmoSolution:
    """Solve the dual and return the full solution (all alphas retained).

    A pass is one sweep over either all points or the non-bound subset;
    max_passes defaults to 10 N.  If the budget runs out the best state so
    far is returned with converged=False and a warning.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError("training data must be a 2-D array with >= 2 rows")
    if y.shape != (X.shape[0],) or not np.all(np.isin(y, (-1.0, 1.0))):
        raise DataError("labels must be +1/-1 and match the row count")
    if np.unique(y).size < 2:
        raise DataError("training data contains a single class")
    if C <= 0 or gamma <= 0 or tol <= 0:
        raise DataError("C, gamma and tol must be positive")
    n = X.shape[0]
    if max_passes is None:
        max_passes = 10 * n

    state = _SmoState(X, y, C, gamma, tol, cache_bytes, seed)
    trace: list[float] = []
    examine_all = True
    passes = 0
    converged = False
    while passes < max_passes:
        changed = 0
        targets = range(n) if examine_all else state.nonbound_indices().tolist()
        for i2 in targets:
            if state.examine(int(i2)):
                changed += 1
                if record_objective:
                    trace.append(dual_objective(state.alphas, y, X, gamma))
        passes += 1
        if examine_all:
            if changed == 0:
                converged = True
                break
            examine_all = False
        elif changed == 0:
            examine_all = True
    if not converged:
        warnings.warn(
            f"SMO did not converge within {max_passes} passes (tol={tol})",
            RuntimeWarning,
            stacklevel=2,
        )
    if not (np.all(np.isfinite(state.alphas)) and np.isfinite(state.b)):
        raise NumericalError("SMO produced non-finite multipliers")
    return SmoSolution(
        X, y, state.alphas, state.b, gamma, C, converged, passes, trace
    )


def fit_smo(
    X: np.ndarray,
    y: np.ndarray,
    C: float = DEFAULT_C,
    gamma: float = DEFAULT_GAMMA,
    tol: float = DEFAULT_TOL,
    max_passes: int | None = None,
    seed: int = 0,
    cache_bytes: int = DEFAULT_CACHE_BYTES,
) -> KernelModel:
    """Train and truncate to the support-vector expansion."""
    return smo_solve(
        X, y, C=C, gamma=gamma, tol=tol, max_passes=max_passes,
        seed=seed, cache_bytes=cache_bytes,
    ).to_model()
