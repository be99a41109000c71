"""
Toeplitz-FFT operators
Circulant embedding of 3-level block-Toeplitz kernels and the matrix-free VIE body operator
"""
import logging
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.fft

from VSIE.errors import ArgumentError
from VSIE.kernels.geometry import VoxelGrid
from VSIE.kernels.vie_kernels import COMPONENTS, ToeplitzKernels

logger = logging.getLogger(__name__)


def _circulant_offsets(dims: Tuple[int, int, int]) -> Tuple[np.ndarray, np.ndarray]:
    """Signed offsets of every circulant position and the mask of non-wrapping ones"""
    axes, valid = [], []
    for n in dims:
        m = np.arange(2 * n)
        o = np.where(m < n, m, m - 2 * n)
        o[m == n] = 0
        axes.append(o)
        valid.append(m != n)
    offsets = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    mask = valid[0][:, None, None] & valid[1][None, :, None] & valid[2][None, None, :]
    return offsets, mask


class BlockCirculant:
    """Symmetric 3x3 block convolution on a grid, applied through cached 2n-circulant spectra"""

    def __init__(self, kernels: ToeplitzKernels, workers: int = 1):
        self.dims = tuple(kernels.dims)
        self.shape = tuple(2 * n for n in self.dims)
        self.workers = max(1, int(workers))
        offsets, mask = _circulant_offsets(self.dims)
        self.spectra: Dict[str, np.ndarray] = {}
        for name in COMPONENTS:
            u, v = "xyz".index(name[0]), "xyz".index(name[1])
            column = np.where(mask, kernels.lookup(u, v, offsets), 0.0)
            self.spectra[name] = scipy.fft.fftn(column, workers=self.workers)

    def spectrum(self, u: int, v: int) -> np.ndarray:
        a, b = min(u, v), max(u, v)
        return self.spectra["xyz"[a] + "xyz"[b]]

    def apply(self, fields: np.ndarray) -> np.ndarray:
        """Convolve a (3, n1, n2, n3) vector field"""
        if fields.shape != (3,) + self.dims:
            raise ArgumentError(f"expected field of shape {(3,) + self.dims}, got {fields.shape}")
        transformed = [scipy.fft.fftn(fields[v], s=self.shape, workers=self.workers) for v in range(3)]
        out = np.empty(fields.shape, dtype=np.complex128)
        n1, n2, n3 = self.dims
        for u in range(3):
            acc = sum(self.spectrum(u, v) * transformed[v] for v in range(3))
            out[u] = scipy.fft.ifftn(acc, workers=self.workers)[:n1, :n2, :n3]
        return out


def to_components(j: np.ndarray, dims: Tuple[int, int, int]) -> np.ndarray:
    """Component-major flat vector -> (3, n1, n2, n3), column-major voxels"""
    n_v = int(np.prod(dims))
    return np.stack([j[c * n_v:(c + 1) * n_v].reshape(dims, order="F") for c in range(3)])


def to_flat(fields: np.ndarray) -> np.ndarray:
    return np.concatenate([fields[c].reshape(-1, order="F") for c in range(3)])


class ToeplitzFFTOperator:
    """Z_bb j = M_eps_r j - M_chi_e (j + K j) with K applied by FFT"""

    def __init__(self, grid: VoxelGrid, kernels: ToeplitzKernels, workers: int = 1):
        if tuple(kernels.dims) != tuple(grid.dims):
            raise ArgumentError(f"kernel dims {kernels.dims} do not match grid {grid.dims}")
        self.grid = grid
        self.kernels = kernels
        self.dims = grid.dims
        self.n = 3 * grid.n_v
        self.eps_r = grid.eps_r
        self.chi_e = grid.chi_e
        self.convolution = BlockCirculant(kernels, workers)
        logger.info(f"✅ Toeplitz-FFT operator ready on {self.dims} grid "
                    f"({'Tucker' if kernels.is_compressed else 'dense'} kernels)")

    def volume_field(self, j: np.ndarray) -> np.ndarray:
        """K j as a (3, n1, n2, n3) field"""
        return self.convolution.apply(to_components(j, self.dims))

    def apply(self, j: np.ndarray) -> np.ndarray:
        j = np.asarray(j)
        if j.shape != (self.n,):
            raise ArgumentError(f"body vector has shape {j.shape}, expected ({self.n},)")
        fields = to_components(j, self.dims)
        kj = self.convolution.apply(fields)
        out = self.eps_r[None] * fields - self.chi_e[None] * (fields + kj)
        return to_flat(out)

    __call__ = apply


def toeplitz_apply(op: ToeplitzFFTOperator, j_b: np.ndarray) -> np.ndarray:
    return op.apply(j_b)


def toeplitz_dense(kernels: ToeplitzKernels, grid: VoxelGrid,
                   voxel_ids: Optional[np.ndarray] = None) -> np.ndarray:
    """Dense K over the selected voxels, component-major rows and columns"""
    if voxel_ids is None:
        voxel_ids = np.arange(grid.n_v)
    multi = grid.multi_index(np.asarray(voxel_ids))
    diff = multi[:, None, :] - multi[None, :, :]
    n = len(multi)
    out = np.empty((3 * n, 3 * n), dtype=np.complex128)
    for u in range(3):
        for v in range(u, 3):
            block = kernels.lookup(u, v, diff)
            out[u * n:(u + 1) * n, v * n:(v + 1) * n] = block
            out[v * n:(v + 1) * n, u * n:(u + 1) * n] = block
    return out


def body_matrix(kernels: ToeplitzKernels, grid: VoxelGrid,
                voxel_ids: Optional[np.ndarray] = None) -> np.ndarray:
    """Dense Z_bb = M_eps_r - M_chi_e (I + K) over the selected voxels"""
    if voxel_ids is None:
        voxel_ids = np.arange(grid.n_v)
    eps = np.tile(grid.eps_r.reshape(-1, order="F")[voxel_ids], 3)
    chi = np.tile(grid.chi_e.reshape(-1, order="F")[voxel_ids], 3)
    K = toeplitz_dense(kernels, grid, voxel_ids)
    Z = -chi[:, None] * K
    Z[np.diag_indices_from(Z)] += eps - chi
    return Z
