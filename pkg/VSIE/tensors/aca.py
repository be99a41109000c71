"""
Adaptive cross approximation
Partial-pivot ACA of matrices given by an entry function
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from VSIE.errors import ArgumentError

logger = logging.getLogger(__name__)

# entry(rows, cols) -> values, elementwise over two equal-length index arrays
MatrixEntry = Callable[[np.ndarray, np.ndarray], np.ndarray]

# consecutive zero residual rows accepted before the remainder counts as zero
ZERO_ROW_LIMIT = 8


@dataclass(frozen=True, eq=False)
class LowRankFactors:
    """U V* with U: m x k and V: n x k"""

    U: np.ndarray
    V: np.ndarray
    converged: bool = True
    evaluations: int = 0
    row_pivots: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    col_pivots: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        if self.U.shape[1] != self.V.shape[1]:
            raise ArgumentError(f"factor ranks differ: {self.U.shape} vs {self.V.shape}")

    @property
    def rank(self) -> int:
        return int(self.U.shape[1])

    @property
    def shape(self):
        return (self.U.shape[0], self.V.shape[0])

    def full(self) -> np.ndarray:
        return self.U @ self.V.conj().T

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.U @ (self.V.conj().T @ x)

    def matvec_transpose(self, y: np.ndarray) -> np.ndarray:
        """(U V*)^T y = conj(V) U^T y, no conjugation of y"""
        return self.V.conj() @ (self.U.T @ y)

    def element_count(self) -> int:
        return int(self.U.size + self.V.size)


def default_rank_cap(rows: int, cols: int) -> int:
    return max(1, math.ceil(min(rows, cols) / 2))


def aca(entry: MatrixEntry, rows: int, cols: int, tol: float,
        max_rank: Optional[int] = None, min_rank: int = 0) -> LowRankFactors:
    """Partial-pivot ACA.

    Stops once ||u_k|| ||v_k|| <= tol * ||A_k||_F, with ||A_k||_F updated
    incrementally. ``min_rank`` forces extra cross steps past that rule.
    """
    if tol <= 0:
        raise ArgumentError(f"tol must be positive, got {tol}")
    if rows <= 0 or cols <= 0:
        raise ArgumentError(f"matrix must be non-empty, got {rows}x{cols}")
    cap = min(default_rank_cap(rows, cols) if max_rank is None else int(max_rank), rows, cols)
    min_rank = min(min_rank, cap)

    a_vecs = np.zeros((rows, cap), dtype=np.complex128)
    b_vecs = np.zeros((cap, cols), dtype=np.complex128)
    used_rows = np.zeros(rows, dtype=bool)
    used_cols = np.zeros(cols, dtype=bool)
    row_pivots, col_pivots = [], []
    all_rows, all_cols = np.arange(rows), np.arange(cols)
    norm2 = 0.0
    evaluations = 0
    converged = False
    k = 0
    i = 0
    zero_rows = 0

    while k < cap:
        row = np.asarray(entry(np.full(cols, i), all_cols), dtype=np.complex128)
        evaluations += cols
        row = row - a_vecs[i, :k] @ b_vecs[:k]
        used_rows[i] = True

        magnitude = np.abs(row)
        magnitude[used_cols] = -1.0
        j = int(np.argmax(magnitude))
        pivot = row[j]
        if magnitude[j] <= 1e-14 * math.sqrt(norm2):
            zero_rows += 1
            remaining = np.flatnonzero(~used_rows)
            if (k > 0 and k >= min_rank) or remaining.size == 0 or zero_rows >= ZERO_ROW_LIMIT:
                converged = True
                break
            i = int(remaining[0])
            continue
        zero_rows = 0

        b = row / pivot
        col = np.asarray(entry(all_rows, np.full(rows, j)), dtype=np.complex128)
        evaluations += rows
        a = col - a_vecs[:, :k] @ b_vecs[:k, j]
        used_cols[j] = True

        cross = 0.0
        if k > 0:
            cross = 2.0 * float(np.real(np.sum((a_vecs[:, :k].conj().T @ a) * (b_vecs[:k].conj() @ b))))
        step = float(np.linalg.norm(a) * np.linalg.norm(b))
        norm2 = max(norm2 + cross + step ** 2, 0.0)
        a_vecs[:, k] = a
        b_vecs[k] = b
        row_pivots.append(i)
        col_pivots.append(j)
        k += 1

        if step <= tol * math.sqrt(norm2) and k >= min_rank:
            converged = True
            break

        magnitude = np.abs(a)
        magnitude[used_rows] = -1.0
        if np.all(used_rows):
            converged = True
            break
        i = int(np.argmax(magnitude))

    if not converged and k == min(rows, cols):
        converged = True
    if not converged:
        logger.warning(f"⚠️ ACA reached rank cap {cap} on a {rows}x{cols} matrix before tol {tol:g}")

    return LowRankFactors(
        U=a_vecs[:, :k].copy(),
        V=b_vecs[:k].conj().T.copy(),
        converged=converged,
        evaluations=evaluations,
        row_pivots=np.asarray(row_pivots, dtype=np.int64),
        col_pivots=np.asarray(col_pivots, dtype=np.int64),
    )


def sampled_error(factors: LowRankFactors, entry: MatrixEntry, samples: int = 1000,
                  seed: int = 0) -> float:
    """Relative RMS error of U V* on uniformly sampled entries"""
    rows, cols = factors.shape
    rng = np.random.default_rng(seed)
    ri = rng.integers(0, rows, size=samples)
    ci = rng.integers(0, cols, size=samples)
    exact = np.asarray(entry(ri, ci), dtype=np.complex128)
    approx = np.sum(factors.U[ri] * factors.V[ci].conj(), axis=1)
    scale = np.linalg.norm(exact)
    diff = np.linalg.norm(exact - approx)
    return float(diff / scale) if scale > 0 else float(diff)
