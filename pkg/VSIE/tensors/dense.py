"""
Dense tensors
Column-major complex arrays with mode unfolding and folding
"""
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from VSIE.errors import ArgumentError


@dataclass(frozen=True, eq=False)
class DenseTensor:
    """Uncompressed d-dimensional complex tensor.

    ``data`` is held with shape ``dims``; the linear layout used by every
    reshape in this package is column-major (first index fastest).
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim == 0 or arr.size == 0:
            raise ArgumentError("DenseTensor needs at least one non-empty dimension")
        if not np.iscomplexobj(arr):
            arr = arr.astype(np.complex128)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_flat(cls, dims: Sequence[int], flat: np.ndarray) -> "DenseTensor":
        dims = tuple(int(n) for n in dims)
        flat = np.asarray(flat)
        if any(n <= 0 for n in dims):
            raise ArgumentError(f"extents must be positive, got {dims}")
        if int(np.prod(dims)) != flat.size:
            raise ArgumentError(f"product of dims {dims} != data length {flat.size}")
        return cls(flat.reshape(dims, order="F"))

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    def flat(self) -> np.ndarray:
        """Column-major linearisation"""
        return self.data.reshape(-1, order="F")

    def reshape(self, dims: Sequence[int]) -> "DenseTensor":
        """Same data, new extents"""
        return DenseTensor.from_flat(dims, self.flat())

    def norm(self) -> float:
        return float(np.linalg.norm(self.flat()))


def _check_mode(mode: int, ndim: int) -> int:
    if not 1 <= mode <= ndim:
        raise ArgumentError(f"mode {mode} out of range 1..{ndim}")
    return mode - 1


def unfold(t: DenseTensor, mode: int) -> np.ndarray:
    """Mode-``mode`` unfolding (1-based): n_mode x prod(other extents)"""
    axis = _check_mode(mode, t.ndim)
    moved = np.moveaxis(t.data, axis, 0)
    return moved.reshape(t.dims[axis], -1, order="F")


def fold(matrix: np.ndarray, mode: int, dims: Sequence[int]) -> DenseTensor:
    """Inverse of :func:`unfold`"""
    dims = tuple(int(n) for n in dims)
    axis = _check_mode(mode, len(dims))
    moved_dims = (dims[axis],) + dims[:axis] + dims[axis + 1:]
    matrix = np.asarray(matrix)
    if matrix.shape != (dims[axis], int(np.prod(moved_dims[1:]))):
        raise ArgumentError(f"matrix shape {matrix.shape} does not unfold {dims} at mode {mode}")
    moved = matrix.reshape(moved_dims, order="F")
    return DenseTensor(np.moveaxis(moved, 0, axis))


def mode_product(t: np.ndarray, matrix: np.ndarray, axis: int) -> np.ndarray:
    """Multiply ``matrix`` (p x n_axis) into ``t`` along 0-based ``axis``"""
    moved = np.moveaxis(t, axis, 0)
    out = np.tensordot(matrix, moved, axes=(1, 0))
    return np.moveaxis(out, 0, axis)
