"""
Dense near-domain operator
Directly assembled Z_nn and C_n with the matrix-free body block, for validating the pFFT path
"""
import logging

import numpy as np

from VSIE.errors import ArgumentError
from VSIE.kernels.coupling import NEAR_POLICY, coupling_matrix
from VSIE.kernels.geometry import SurfaceMesh, VoxelGrid
from VSIE.kernels.surface import surface_block
from VSIE.operators.toeplitz import ToeplitzFFTOperator

logger = logging.getLogger(__name__)


class DenseNearOperator:
    """Same apply contract as the pFFT operator with every near entry evaluated directly"""

    def __init__(self, mesh: SurfaceMesh, grid: VoxelGrid, k0: float, toeplitz: ToeplitzFFTOperator):
        self.mesh = mesh
        self.grid = grid
        self.toeplitz = toeplitz
        self.m = mesh.m
        self.n_body = 3 * grid.n_v
        self.n = self.m + self.n_body
        self.Z_nn = surface_block(mesh, mesh, k0)
        self.C_n = coupling_matrix(grid, mesh, k0, policy=NEAR_POLICY)
        self.chi = np.tile(grid.chi_e.reshape(-1, order="F"), 3)
        self.stats = {'dense_entries': int(self.Z_nn.size + self.C_n.size)}
        logger.info(f"✅ Dense near operator: {self.m} patches, {self.stats['dense_entries']:,} entries")

    def near_field_on_body(self, x_n: np.ndarray) -> np.ndarray:
        return self.C_n @ x_n

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape != (self.n,):
            raise ArgumentError(f"near vector has shape {x.shape}, expected ({self.n},)")
        x_n, x_b = x[:self.m], x[self.m:]
        y_n = self.Z_nn @ x_n + self.C_n.T @ x_b
        y_b = self.toeplitz.apply(x_b) - self.chi * (self.C_n @ x_n)
        return np.concatenate([y_n, y_b])

    __call__ = apply
