"""
Dense reference solver
Fully assembled coupled block system, symmetry check, GMRES and LU solves
"""
import logging
import time
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from VSIE.errors import ArgumentError, AssemblyError
from VSIE.kernels.coupling import FAR_POLICY, NEAR_POLICY, coupling_matrix
from VSIE.kernels.geometry import SurfaceMesh, VoxelGrid
from VSIE.kernels.surface import surface_block
from VSIE.kernels.vie_kernels import ToeplitzKernels, assemble_vie_kernels
from VSIE.operators.hybrid import surface_scaling
from VSIE.operators.toeplitz import body_matrix
from VSIE.solvers.gmres import GmresConfig, gmres
from VSIE.solvers.metrics import relative_difference
from VSIE.solvers.report import SolveReport

logger = logging.getLogger(__name__)

DENSE_LIMIT = 20000
SYMMETRY_TOL = 1e-10


def active_voxels(grid: VoxelGrid) -> np.ndarray:
    """Linear indices of voxels with nonzero contrast"""
    return np.flatnonzero(np.abs(grid.chi_e.reshape(-1, order="F")) > 0)


def assemble_dense_system(grid: VoxelGrid, far: SurfaceMesh, near: SurfaceMesh, k0: float,
                          kernels: Optional[ToeplitzKernels] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Coupled matrix over (j_f | j_n | j_b on active voxels) and the active voxel ids.

    Vacuum voxel rows reduce to j = 0 and are dropped together with their columns.
    """
    if kernels is None:
        kernels = assemble_vie_kernels(grid, k0)
    voxels = active_voxels(grid)
    m_f, m_n = far.m, near.m
    m = m_f + m_n
    n_b = 3 * len(voxels)

    A = np.zeros((m + n_b, m + n_b), dtype=np.complex128)
    A[:m_f, :m_f] = surface_block(far, far, k0)
    A[m_f:m, m_f:m] = surface_block(near, near, k0)
    if m_f and m_n:
        Z_fn = surface_block(far, near, k0)
        A[:m_f, m_f:m] = Z_fn
        A[m_f:m, :m_f] = Z_fn.T

    if n_b:
        C = np.zeros((n_b, m), dtype=np.complex128)
        if m_f:
            C[:, :m_f] = coupling_matrix(grid, far, k0, voxels, FAR_POLICY)
        if m_n:
            C[:, m_f:] = coupling_matrix(grid, near, k0, voxels, NEAR_POLICY)
        chi = np.tile(grid.chi_e.reshape(-1, order="F")[voxels], 3)
        A[:m, m:] = C.T
        A[m:, :m] = -chi[:, None] * C
        A[m:, m:] = body_matrix(kernels, grid, voxels)
    return A, voxels


def check_symmetry(A: np.ndarray, m: int, chi: np.ndarray, tol: float = SYMMETRY_TOL) -> float:
    """Scale body rows by -1/chi and return the relative asymmetry; AssemblyError above ``tol``"""
    S = A.copy()
    S[m:] = S[m:] / (-chi[:, None])
    asymmetry = float(np.linalg.norm(S - S.T)) / max(float(np.linalg.norm(S)), 1e-300)
    if asymmetry > tol:
        raise AssemblyError(f"row-scaled coupled matrix is not complex-symmetric (asymmetry {asymmetry:.3e})")
    return asymmetry


def solve_dense_system(grid: VoxelGrid, far: SurfaceMesh, near: SurfaceMesh, k0: float,
                       v_f: np.ndarray, v_n: np.ndarray, cfg: GmresConfig = GmresConfig(),
                       direct: bool = True, dense_limit: int = DENSE_LIMIT,
                       kernels: Optional[ToeplitzKernels] = None, scaling: str = "block"
                       ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, SolveReport]:
    """Dense solve in grid-normalised units; returns (j_f, j_n, j_b on the full grid, report).

    The report describes the GMRES iterate. With ``direct`` the returned currents
    are the LU solution; ``direct_check`` is its relative difference to the GMRES
    iterate and ``direct_residual`` its own residual.
    """
    total = far.m + near.m + 3 * grid.n_v
    if total > dense_limit:
        raise ArgumentError(f"dense reference refused: {total:,} unknowns exceed the limit of {dense_limit:,}")
    if grid.spacing != 1.0:
        raise ArgumentError("dense reference expects a grid-normalised voxel grid (spacing 1)")

    logger.info(f"🚀 Dense reference: assembling {total:,} unknowns")
    start = time.perf_counter()
    A, voxels = assemble_dense_system(grid, far, near, k0, kernels)
    m = far.m + near.m
    chi = np.tile(grid.chi_e.reshape(-1, order="F")[voxels], 3)
    asymmetry = check_symmetry(A, m, chi)
    logger.info(f"📊 Dense matrix {A.shape[0]:,}x{A.shape[1]:,}, {len(voxels):,} active voxels, "
                f"asymmetry {asymmetry:.1e}")

    b = np.concatenate([np.asarray(v_f), np.asarray(v_n), np.zeros(A.shape[0] - m)]).astype(np.complex128)
    x, report = gmres(lambda v: A @ v, b, cfg, precondition=surface_scaling(A[:m, :m], scaling))
    report.method = "dense"

    if direct:
        x_direct = scipy.linalg.lu_solve(scipy.linalg.lu_factor(A), b)
        report.direct_check = relative_difference(x, x_direct)
        report.direct_residual = float(np.linalg.norm(A @ x_direct - b)) / float(np.linalg.norm(b))
        logger.info(f"📊 GMRES vs LU relative difference {report.direct_check:.3e}, "
                    f"LU residual {report.direct_residual:.3e}")
        x = x_direct

    j_b = np.zeros(3 * grid.n_v, dtype=np.complex128)
    if len(voxels):
        rows = (np.arange(3)[:, None] * grid.n_v + voxels[None, :]).reshape(-1)
        j_b[rows] = x[m:]
    report.wall_ms = (time.perf_counter() - start) * 1000.0
    logger.info(f"✅ Dense reference solved in {report.wall_ms / 1000.0:.2f}s, residual {report.residual:.3e}")
    return x[:far.m], x[far.m:m], j_b, report


def solve_dense(scene, settings, direct: bool = True) -> Tuple[np.ndarray, np.ndarray, SolveReport]:
    """Gold-standard solve of a built scene; returns (j_c as far|near, j_b, report)"""
    grid, far, near, k0 = scene.normalized()
    v_f, v_n = scene.excitation()
    j_f, j_n, j_b, report = solve_dense_system(grid, far, near, k0, v_f, v_n, settings.gmres_config(),
                                               direct=direct, dense_limit=settings.dense_limit,
                                               scaling=settings.surface_scaling)
    return np.concatenate([j_f, j_n]), j_b, report
