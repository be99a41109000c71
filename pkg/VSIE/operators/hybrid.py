"""
Hybrid block operator
Far surface, near surface and body unknowns coupled through dense, ACA, TT and pFFT blocks
"""
import logging
import time
from fractions import Fraction
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.linalg

from VSIE.errors import ArgumentError, AssemblyError, CompressionError
from VSIE.kernels.geometry import SurfaceMesh, VoxelGrid
from VSIE.kernels.surface import surface_block, surface_pair_entries
from VSIE.kernels.vie_kernels import ToeplitzKernels, assemble_vie_kernels
from VSIE.operators.near_dense import DenseNearOperator
from VSIE.operators.pfft import pfft_build
from VSIE.operators.toeplitz import ToeplitzFFTOperator
from VSIE.operators.tt_coupling import build_tt_coupling
from VSIE.tensors.aca import LowRankFactors, aca, sampled_error

logger = logging.getLogger(__name__)

NEAR_MODES = ("pfft", "dense")
SURFACE_SCALINGS = ("block", "diagonal", "none")


class SurfaceScaling:
    """Normalised surface unknowns for the Krylov solve.

    GMRES iterates on y with the surface currents recovered as j_c = S^-1 y_c
    ("block") or j_c = y_c / diag(S) ("diagonal"), S = [[Z_ff, Z_fn], [Z_nf, Z_nn]];
    body unknowns pass through unchanged.
    """

    def __init__(self, S: np.ndarray, mode: str = "block"):
        if mode not in SURFACE_SCALINGS or mode == "none":
            raise ArgumentError(f"surface scaling must be 'block' or 'diagonal', got '{mode}'")
        S = np.asarray(S, dtype=np.complex128)
        self.mode = mode
        self.m = S.shape[0]
        if mode == "block":
            self.lu = scipy.linalg.lu_factor(S, check_finite=True)
            pivots = np.abs(np.diag(self.lu[0]))
            if not np.all(pivots > 1e-14 * max(float(pivots.max(initial=0.0)), 1e-300)):
                raise AssemblyError("surface block is singular; cannot normalise surface unknowns")
        else:
            self.diagonal = np.diag(S).copy()
            if np.any(self.diagonal == 0):
                raise AssemblyError("surface block has a zero self term")

    def __call__(self, y: np.ndarray) -> np.ndarray:
        x = np.array(y, dtype=np.complex128)
        if self.mode == "block":
            x[:self.m] = scipy.linalg.lu_solve(self.lu, x[:self.m])
        else:
            x[:self.m] = x[:self.m] / self.diagonal
        return x


def surface_scaling(S: np.ndarray, mode: str = "block") -> Optional[SurfaceScaling]:
    """Scaling for the stacked unknowns, None without surfaces or with ``mode`` 'none'"""
    if mode not in SURFACE_SCALINGS:
        raise ArgumentError(f"surface scaling must be one of {SURFACE_SCALINGS}, got '{mode}'")
    if mode == "none" or S.shape[0] == 0:
        return None
    return SurfaceScaling(S, mode)


class HybridSystem:
    """Stacked unknowns (j_f | j_n | j_b).

    Row blocks::

        y_f = Z_ff x_f + (U V*)^T x_n + C_f^T x_b
        y_n = U V* x_f + [near row](x_n, x_b)
        y_b = -chi C_f x_f + [body row](x_n, x_b)
    """

    def __init__(self, Z_ff: np.ndarray, fn_block: Optional[LowRankFactors], coupling_far, near_op,
                 chi_e: np.ndarray, stats: Optional[Dict] = None,
                 scaling: Optional[SurfaceScaling] = None):
        self.Z_ff = Z_ff
        self.fn_block = fn_block
        self.coupling_far = coupling_far
        self.near_op = near_op
        self.m_f = Z_ff.shape[0]
        self.m_n = near_op.m
        self.n_b = near_op.n_body
        self.n = self.m_f + self.m_n + self.n_b
        self.chi = np.tile(chi_e.reshape(-1, order="F"), 3)
        self.stats = stats or {}
        self.scaling = scaling

    def split(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return x[:self.m_f], x[self.m_f:self.m_f + self.m_n], x[self.m_f + self.m_n:]

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape != (self.n,):
            raise ArgumentError(f"stacked vector has shape {x.shape}, expected ({self.n},)")
        x_f, x_n, x_b = self.split(x)
        near = self.near_op.apply(x[self.m_f:])
        if self.m_f == 0:
            return near

        y_f = self.Z_ff @ x_f + self.coupling_far.apply_transpose(x_b)
        y_n = near[:self.m_n]
        if self.fn_block is not None:
            y_f = y_f + self.fn_block.matvec_transpose(x_n)
            y_n = y_n + self.fn_block.matvec(x_f)
        y_b = near[self.m_n:] - self.chi * self.coupling_far.apply(x_f)
        return np.concatenate([y_f, y_n, y_b])

    __call__ = apply

    def block_residuals(self, x: np.ndarray, b: np.ndarray) -> Dict[str, float]:
        """Relative residual per block, normalised by the full right-hand side"""
        r = self.apply(x) - b
        scale = float(np.linalg.norm(b)) or 1.0
        r_f, r_n, r_b = self.split(r)
        return {
            'residual_far': float(np.linalg.norm(r_f)) / scale,
            'residual_near': float(np.linalg.norm(r_n)) / scale,
            'residual_body': float(np.linalg.norm(r_b)) / scale,
        }


def hybrid_apply(system: HybridSystem, x: np.ndarray) -> np.ndarray:
    return system.apply(x)


def _fn_entry(near: SurfaceMesh, far: SurfaceMesh, k0: float):
    def entry(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        return surface_pair_entries(near, rows, far, cols, k0)
    return entry


def surface_matrix(Z_ff: np.ndarray, fn_block: Optional[LowRankFactors], near: SurfaceMesh,
                   k0: float) -> np.ndarray:
    """Dense surface block over (j_f | j_n), far-near coupling taken from its ACA factors"""
    m_f = Z_ff.shape[0]
    m = m_f + near.m
    S = np.zeros((m, m), dtype=np.complex128)
    S[:m_f, :m_f] = Z_ff
    if near.m:
        S[m_f:, m_f:] = surface_block(near, near, k0)
    if fn_block is not None:
        Z_nf = fn_block.full()
        S[m_f:, :m_f] = Z_nf
        S[:m_f, m_f:] = Z_nf.T
    return S


def build_hybrid_system(grid: VoxelGrid, far: SurfaceMesh, near: SurfaceMesh, k0: float,
                        tol_tt: float = 1e-3, tol_aca: float = 1e-3, tol_tucker: Optional[float] = 1e-5,
                        seed: int = 0, workers: int = 1, coupling_mode: str = "tt",
                        near_mode: str = "pfft", stencil: int = 5, extend: bool = False,
                        recompress: bool = False, kernels: Optional[ToeplitzKernels] = None,
                        scaling: str = "block") -> HybridSystem:
    """Assemble every block in grid-normalised units (spacing 1, k0 times the voxel size)"""
    if grid.spacing != 1.0:
        raise ArgumentError("hybrid system expects a grid-normalised voxel grid (spacing 1)")
    if near_mode not in NEAR_MODES:
        raise ArgumentError(f"near mode must be one of {NEAR_MODES}, got '{near_mode}'")
    if scaling not in SURFACE_SCALINGS:
        raise ArgumentError(f"surface scaling must be one of {SURFACE_SCALINGS}, got '{scaling}'")
    start = time.perf_counter()
    stats: Dict = {}

    if kernels is None:
        kernels = assemble_vie_kernels(grid, k0)
    if tol_tucker:
        kernels = kernels.compress(tol_tucker)
    stats['cf_kernels'] = kernels.compression_factor()
    toeplitz = ToeplitzFFTOperator(grid, kernels, workers)

    if near_mode == "pfft":
        near_op = pfft_build(near, grid, k0, toeplitz, stencil=stencil, extend=extend, workers=workers)
    else:
        near_op = DenseNearOperator(near, grid, k0, toeplitz)
    stats['near'] = dict(near_op.stats)

    Z_ff = surface_block(far, far, k0)

    fn_block = None
    stats['cf_fn'] = None
    stats['aca_evals'] = 0
    if far.m and near.m:
        entry = _fn_entry(near, far, k0)
        fn_block = aca(entry, near.m, far.m, tol_aca)
        error = sampled_error(fn_block, entry, seed=seed)
        stats['cf_fn'] = Fraction(near.m * far.m, max(fn_block.element_count(), 1))
        stats['aca_evals'] = fn_block.evaluations
        stats['aca_rank'] = fn_block.rank
        stats['aca_error'] = error
        logger.info(f"📊 ACA far-near block: rank {fn_block.rank}, sampled error {error:.2e}, "
                    f"{fn_block.evaluations:,} evaluations")
        if not fn_block.converged or error > 10 * tol_aca:
            raise CompressionError(f"ACA of the far-near block stopped at rank {fn_block.rank} "
                                   f"with sampled error {error:.3e}", result=fn_block)

    coupling = build_tt_coupling(grid, far, k0, tol_tt, seed=seed, workers=workers,
                                 mode=coupling_mode, recompress=recompress)
    stats['coupling'] = coupling.stats() if far.m else {}
    stats['cf_coupling'] = coupling.compression_factor()
    stats['entry_evals'] = coupling.evaluations if far.m else 0
    stats['tt_max_rank'] = coupling.max_rank()
    normalisation = None
    if scaling != "none":
        normalisation = surface_scaling(surface_matrix(Z_ff, fn_block, near, k0), scaling)
    stats['surface_scaling'] = scaling
    stats['build_seconds'] = time.perf_counter() - start

    system = HybridSystem(Z_ff, fn_block, coupling, near_op, grid.chi_e, stats, normalisation)
    logger.info(f"✅ Hybrid system built: {system.m_f} far + {system.m_n} near + {system.n_b} body "
                f"unknowns in {stats['build_seconds']:.2f}s")
    return system
