"""
Compressed far coupling
TT-cross (or whole-matrix ACA) compression of the far-surface to body coupling tensor
"""
import logging
import math
import time
from fractions import Fraction
from typing import Dict, List, Optional

import numpy as np

from VSIE.errors import ArgumentError, CompressionError
from VSIE.kernels.coupling import FAR_POLICY, coupling_fields, coupling_tensor_entry
from VSIE.kernels.geometry import SurfaceMesh, VoxelGrid
from VSIE.tensors.aca import LowRankFactors, aca, sampled_error
from VSIE.tensors.tt import TTTensor, tt_apply, tt_apply_transpose
from VSIE.tensors.tt_cross import TTCrossResult, tt_cross

logger = logging.getLogger(__name__)

COUPLING_MODES = ("tt", "aca")


class TTCouplingOperator:
    """One TT per field component over (n1, n2, n3, m_f)"""

    def __init__(self, dims, m_f: int, tensors: List[TTTensor], results: List[TTCrossResult] = ()):
        self.dims = tuple(dims)
        self.n_v = int(np.prod(self.dims))
        self.m_f = int(m_f)
        self.tensors = list(tensors)
        self.results = list(results)
        if self.m_f and len(self.tensors) != 3:
            raise ArgumentError(f"expected 3 component tensors, got {len(self.tensors)}")

    @property
    def total_entries(self) -> int:
        return 3 * self.n_v * self.m_f

    @property
    def evaluations(self) -> int:
        return int(sum(r.evaluations for r in self.results))

    def element_count(self) -> int:
        return int(sum(t.core_elements() for t in self.tensors))

    def compression_factor(self) -> Optional[Fraction]:
        if not self.m_f:
            return None
        return Fraction(self.total_entries, self.element_count())

    def max_rank(self) -> int:
        return max((t.max_rank() for t in self.tensors), default=0)

    def stats(self) -> Dict:
        cf = self.compression_factor()
        return {
            'mode': 'tt',
            'evaluations': self.evaluations,
            'validation_evaluations': int(sum(r.validation_evaluations for r in self.results)),
            'total_entries': self.total_entries,
            'compression_factor': cf,
            'ranks': [t.ranks for t in self.tensors],
            'max_rank': self.max_rank(),
            'errors': [r.error for r in self.results],
        }

    def apply(self, x_f: np.ndarray) -> np.ndarray:
        """Coupling field C_f x_f on every voxel, component-major"""
        x_f = np.asarray(x_f)
        if x_f.shape != (self.m_f,):
            raise ArgumentError(f"far vector has shape {x_f.shape}, expected ({self.m_f},)")
        if not self.m_f:
            return np.zeros(3 * self.n_v, dtype=np.complex128)
        return np.concatenate([tt_apply(t, x_f) for t in self.tensors])

    def apply_transpose(self, y_b: np.ndarray) -> np.ndarray:
        """C_f^T y_b, plain transpose"""
        y_b = np.asarray(y_b)
        if y_b.shape != (3 * self.n_v,):
            raise ArgumentError(f"body vector has shape {y_b.shape}, expected ({3 * self.n_v},)")
        if not self.m_f:
            return np.zeros(0, dtype=np.complex128)
        parts = np.split(y_b, 3)
        return sum(tt_apply_transpose(t, part) for t, part in zip(self.tensors, parts))


class ACACouplingOperator:
    """Whole coupling matrix (3 n_v x m_f) as one ACA factorisation"""

    def __init__(self, dims, m_f: int, factors: Optional[LowRankFactors], validation_error: float = 0.0):
        self.dims = tuple(dims)
        self.n_v = int(np.prod(self.dims))
        self.m_f = int(m_f)
        self.factors = factors
        self.validation_error = validation_error

    @property
    def total_entries(self) -> int:
        return 3 * self.n_v * self.m_f

    @property
    def evaluations(self) -> int:
        return self.factors.evaluations if self.factors is not None else 0

    def compression_factor(self) -> Optional[Fraction]:
        if not self.m_f:
            return None
        return Fraction(self.total_entries, max(self.factors.element_count(), 1))

    def max_rank(self) -> int:
        return self.factors.rank if self.factors is not None else 0

    def stats(self) -> Dict:
        return {
            'mode': 'aca',
            'evaluations': self.evaluations,
            'validation_evaluations': 0,
            'total_entries': self.total_entries,
            'compression_factor': self.compression_factor(),
            'ranks': [self.max_rank()],
            'max_rank': self.max_rank(),
            'errors': [self.validation_error],
        }

    def apply(self, x_f: np.ndarray) -> np.ndarray:
        x_f = np.asarray(x_f)
        if x_f.shape != (self.m_f,):
            raise ArgumentError(f"far vector has shape {x_f.shape}, expected ({self.m_f},)")
        if not self.m_f:
            return np.zeros(3 * self.n_v, dtype=np.complex128)
        return self.factors.matvec(x_f)

    def apply_transpose(self, y_b: np.ndarray) -> np.ndarray:
        y_b = np.asarray(y_b)
        if y_b.shape != (3 * self.n_v,):
            raise ArgumentError(f"body vector has shape {y_b.shape}, expected ({3 * self.n_v},)")
        if not self.m_f:
            return np.zeros(0, dtype=np.complex128)
        return self.factors.matvec_transpose(y_b)


def _matrix_entry(grid: VoxelGrid, mesh: SurfaceMesh, k0: float):
    n_v = grid.n_v

    def entry(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        component, voxel = np.divmod(rows, n_v)
        fields = coupling_fields(grid, mesh, grid.multi_index(voxel), cols, k0, *FAR_POLICY)
        return fields[np.arange(len(rows)), component]

    return entry


def build_tt_coupling(grid: VoxelGrid, mesh: SurfaceMesh, k0: float, tol: float = 1e-3,
                      max_rank: Optional[int] = None, seed: int = 0, recompress: bool = False,
                      workers: int = 1, mode: str = "tt"):
    """Compress the far coupling tensor with TT-cross over the far-policy coupling oracle"""
    if mode not in COUPLING_MODES:
        raise ArgumentError(f"coupling mode must be one of {COUPLING_MODES}, got '{mode}'")
    if mesh.m == 0:
        return TTCouplingOperator(grid.dims, 0, [])

    start = time.perf_counter()
    logger.info(f"🚀 Compressing far coupling ({mode}): {grid.dims} voxels x {mesh.m} patches, tol {tol:g}")

    if mode == "aca":
        entry = _matrix_entry(grid, mesh, k0)
        cap = mesh.m if max_rank is None else max_rank
        factors = aca(entry, 3 * grid.n_v, mesh.m, tol, max_rank=cap)
        error = sampled_error(factors, entry, seed=seed)
        op = ACACouplingOperator(grid.dims, mesh.m, factors, error)
        if not factors.converged or error > 10 * tol:
            raise CompressionError(f"ACA coupling reached rank {factors.rank} with sampled error {error:.3e}",
                                   result=op)
    else:
        dims = tuple(grid.dims) + (mesh.m,)
        # bonds may reach the full unfolding rank
        cap = math.prod(dims) if max_rank is None else max_rank
        results = []
        for component in range(3):
            entry = coupling_tensor_entry(grid, mesh, k0, component)
            result = tt_cross(entry, dims, tol=tol, max_rank=cap, seed=seed + component,
                              recompress=recompress, workers=workers)
            results.append(result)
            if not result.converged:
                op = TTCouplingOperator(grid.dims, mesh.m, [r.tt for r in results], results)
                raise CompressionError(
                    f"TT-cross of coupling component {'xyz'[component]} stopped at error {result.error:.3e} "
                    f"with ranks {result.tt.ranks}",
                    result=op,
                )
        op = TTCouplingOperator(grid.dims, mesh.m, [r.tt for r in results], results)

    stats = op.stats()
    logger.info(f"✅ Far coupling compressed in {time.perf_counter() - start:.2f}s: "
                f"factor {float(stats['compression_factor']):.1f}, "
                f"{stats['evaluations']:,} / {stats['total_entries']:,} entries evaluated, "
                f"max rank {stats['max_rank']}")
    return op
