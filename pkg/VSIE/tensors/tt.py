"""
Tensor-train format
TT-SVD, TT rounding, element evaluation and the structured matvec schedules
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Sequence, Tuple

import numpy as np
import scipy.linalg

from VSIE.errors import ArgumentError
from VSIE.tensors.dense import DenseTensor

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TTTensor:
    """Tensor train: core k has shape r_{k-1} x n_k x r_k with r_0 = r_d = 1"""

    cores: Tuple[np.ndarray, ...]

    def __post_init__(self):
        cores = tuple(np.asarray(c, dtype=np.complex128) for c in self.cores)
        if not cores:
            raise ArgumentError("a tensor train needs at least one core")
        for k, core in enumerate(cores):
            if core.ndim != 3:
                raise ArgumentError(f"core {k} must be 3-dimensional, got shape {core.shape}")
        if cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
            raise ArgumentError("boundary ranks must be 1")
        for k in range(len(cores) - 1):
            if cores[k].shape[2] != cores[k + 1].shape[0]:
                raise ArgumentError(
                    f"rank mismatch between core {k} ({cores[k].shape}) and core {k + 1} ({cores[k + 1].shape})"
                )
        object.__setattr__(self, "cores", cores)

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def ranks(self) -> Tuple[int, ...]:
        return tuple(c.shape[2] for c in self.cores[:-1])

    @property
    def ndim(self) -> int:
        return len(self.cores)

    def max_rank(self) -> int:
        return max(self.ranks, default=1)

    def element(self, index: Sequence[int]) -> complex:
        return complex(self.elements(np.asarray(index, dtype=np.int64)[None, :])[0])

    def elements(self, indices: np.ndarray) -> np.ndarray:
        """Chain products G1[i1] G2[i2] ... Gd[id] for an (N, d) index array"""
        indices = np.asarray(indices, dtype=np.int64)
        if indices.ndim != 2 or indices.shape[1] != self.ndim:
            raise ArgumentError(f"expected (N, {self.ndim}) indices, got {indices.shape}")
        vec = self.cores[0][0, indices[:, 0], :]
        for k in range(1, self.ndim):
            vec = np.einsum("na,anb->nb", vec, self.cores[k][:, indices[:, k], :])
        return vec[:, 0]

    def full(self) -> DenseTensor:
        mat = self.cores[0][0]
        for core in self.cores[1:]:
            r_prev, n, r = core.shape
            mat = mat @ core.reshape(r_prev, n * r, order="F")
            mat = mat.reshape(-1, r, order="F")
        return DenseTensor(mat.reshape(self.dims, order="F"))

    def core_elements(self) -> int:
        return int(sum(c.size for c in self.cores))

    def compression_factor(self) -> Fraction:
        """Dense element count over core element count, exact"""
        dense = 1
        for n in self.dims:
            dense *= int(n)
        return Fraction(dense, self.core_elements())


def truncation_rank(s: np.ndarray, delta: float) -> int:
    tail = np.concatenate([np.cumsum((s ** 2)[::-1])[::-1], [0.0]])
    return max(int(np.argmax(tail <= delta ** 2)), 1)


def tt_svd(t: DenseTensor, tol: float) -> TTTensor:
    """TT decomposition by successive truncated SVDs.

    Each of the d-1 truncations discards at most tol/sqrt(d-1) of the
    Frobenius norm, so the reconstruction error is bounded by tol*||t||.
    """
    if tol <= 0:
        raise ArgumentError(f"tol must be positive, got {tol}")
    dims = t.dims
    d = len(dims)
    norm = t.norm()
    if d == 1:
        return TTTensor((t.data.reshape(1, dims[0], 1),))
    if norm == 0.0:
        return TTTensor(tuple(np.zeros((1, n, 1), dtype=np.complex128) for n in dims))

    delta = tol / np.sqrt(d - 1) * norm
    cores: List[np.ndarray] = []
    mat = t.flat()
    r_prev = 1
    for k in range(d - 1):
        mat = mat.reshape(r_prev * dims[k], -1, order="F")
        u, s, vh = scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesvd")
        r = truncation_rank(s, delta)
        cores.append(u[:, :r].reshape(r_prev, dims[k], r, order="F"))
        mat = s[:r, None] * vh[:r]
        r_prev = r
    cores.append(mat.reshape(r_prev, dims[-1], 1, order="F"))
    result = TTTensor(tuple(cores))
    logger.debug(f"TT-SVD ranks {result.ranks} for dims {dims}")
    return result


def tt_round(tt: TTTensor, tol: float) -> TTTensor:
    """Recompress a tensor train with relative accuracy ``tol``"""
    if tol <= 0:
        raise ArgumentError(f"tol must be positive, got {tol}")
    d = tt.ndim
    if d == 1:
        return tt
    cores = [c.copy() for c in tt.cores]
    for k in range(d - 1, 0, -1):
        r0, n, r1 = cores[k].shape
        q, r = np.linalg.qr(cores[k].reshape(r0, n * r1, order="F").T)
        cores[k] = q.T.reshape(-1, n, r1, order="F")
        cores[k - 1] = np.tensordot(cores[k - 1], r.T, axes=(2, 0))
    norm = float(np.linalg.norm(cores[0]))
    if norm == 0.0:
        return TTTensor(tuple(np.zeros((1, n, 1), dtype=np.complex128) for n in tt.dims))
    delta = tol / np.sqrt(d - 1) * norm
    for k in range(d - 1):
        r0, n, r1 = cores[k].shape
        u, s, vh = scipy.linalg.svd(cores[k].reshape(r0 * n, r1, order="F"), full_matrices=False,
                                    lapack_driver="gesvd")
        r = truncation_rank(s, delta)
        cores[k] = u[:, :r].reshape(r0, n, r, order="F")
        cores[k + 1] = np.tensordot(s[:r, None] * vh[:r], cores[k + 1], axes=(1, 0))
    rounded = TTTensor(tuple(cores))
    logger.debug(f"TT rounding {tt.ranks} -> {rounded.ranks}")
    return rounded


def tt_apply(t: TTTensor, x: np.ndarray) -> np.ndarray:
    """Matrix-vector product with the TT read as a (n1...n_{d-1}) x n_d matrix.

    The last core is contracted with ``x`` first, then the remaining cores
    from the right, so no intermediate ever carries the trailing dimension.
    """
    x = np.asarray(x)
    if t.ndim < 2:
        raise ArgumentError("tt_apply needs at least two modes")
    if x.shape != (t.dims[-1],):
        raise ArgumentError(f"x has shape {x.shape}, expected ({t.dims[-1]},)")
    acc = t.cores[-1][:, :, 0] @ x
    for core in reversed(t.cores[:-1]):
        acc = np.tensordot(core, acc, axes=(2, 0))
    return acc[0].reshape(-1, order="F")


def tt_apply_transpose(t: TTTensor, y: np.ndarray) -> np.ndarray:
    """Plain (unconjugated) transpose of :func:`tt_apply`"""
    y = np.asarray(y)
    if t.ndim < 2:
        raise ArgumentError("tt_apply_transpose needs at least two modes")
    lead = t.dims[:-1]
    if y.shape != (int(np.prod(lead)),):
        raise ArgumentError(f"y has shape {y.shape}, expected ({int(np.prod(lead))},)")
    acc = np.tensordot(t.cores[0][0], y.reshape(lead, order="F"), axes=(0, 0))
    for core in t.cores[1:-1]:
        acc = np.tensordot(core, acc, axes=([0, 1], [0, 1]))
    return acc @ t.cores[-1][:, :, 0]
