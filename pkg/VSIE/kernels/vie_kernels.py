"""
VIE kernel assembly
Toeplitz-defining Galerkin kernels of the PWC volume operator and grid point kernels for pFFT
"""
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Sequence, Tuple, Union

import numpy as np

from VSIE.errors import ArgumentError
from VSIE.kernels.geometry import VoxelGrid
from VSIE.kernels.green import dyadic_green
from VSIE.kernels.quadrature import voxel_rule
from VSIE.tensors.dense import DenseTensor
from VSIE.tensors.tucker import TuckerTensor, tucker_hosvd

logger = logging.getLogger(__name__)

COMPONENTS = ("xx", "xy", "xz", "yy", "yz", "zz")
COMPONENT_INDEX: Dict[Tuple[int, int], str] = {}
for _name in COMPONENTS:
    _u, _v = "xyz".index(_name[0]), "xyz".index(_name[1])
    COMPONENT_INDEX[(_u, _v)] = _name
    COMPONENT_INDEX[(_v, _u)] = _name

KernelTensor = Union[DenseTensor, TuckerTensor]


def reflection_sign(u: int, v: int, offsets: np.ndarray) -> np.ndarray:
    """Sign picked up by component (u, v) when negative offset axes are reflected"""
    offsets = np.asarray(offsets)
    flips = np.zeros(offsets.shape[:-1], dtype=np.int64)
    for axis in range(3):
        flips += (offsets[..., axis] < 0) * (int(u == axis) + int(v == axis))
    return np.where(flips % 2 == 0, 1.0, -1.0)


@dataclass(frozen=True, eq=False)
class ToeplitzKernels:
    """First-column data of the six unique blocks of a symmetric 3x3 Toeplitz operator.

    Values are dimensionless (grid-normalised units); entry (o, u, v) is the
    interaction of two voxels displaced by o for components u and v.
    """

    dims: Tuple[int, int, int]
    components: Dict[str, KernelTensor]
    _dense: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        missing = [c for c in COMPONENTS if c not in self.components]
        if missing:
            raise ArgumentError(f"kernel components missing: {missing}")
        for name, tensor in self.components.items():
            if tuple(tensor.dims) != tuple(self.dims):
                raise ArgumentError(f"component {name} has dims {tensor.dims}, expected {self.dims}")

    @property
    def is_compressed(self) -> bool:
        return any(isinstance(t, TuckerTensor) for t in self.components.values())

    def component(self, u: int, v: int) -> np.ndarray:
        name = COMPONENT_INDEX[(u, v)]
        if name not in self._dense:
            tensor = self.components[name]
            dense = tensor.full() if isinstance(tensor, TuckerTensor) else tensor
            self._dense[name] = dense.data
        return self._dense[name]

    def lookup(self, u: int, v: int, offsets: np.ndarray) -> np.ndarray:
        """Entries at arbitrary signed integer offsets (N, 3)"""
        offsets = np.asarray(offsets, dtype=np.int64)
        mag = np.abs(offsets)
        if np.any(mag >= np.asarray(self.dims)):
            raise ArgumentError(f"offset outside kernel extent {self.dims}")
        values = self.component(u, v)[mag[..., 0], mag[..., 1], mag[..., 2]]
        return values * reflection_sign(u, v, offsets)

    def element_count(self) -> int:
        total = 0
        for tensor in self.components.values():
            total += tensor.element_count() if isinstance(tensor, TuckerTensor) else tensor.size
        return total

    def compression_factor(self) -> Fraction:
        dense = len(COMPONENTS) * int(np.prod(self.dims))
        return Fraction(dense, self.element_count())

    def compress(self, tol: float) -> "ToeplitzKernels":
        """Tucker-compress every component with HOSVD at relative accuracy ``tol``"""
        compressed = {}
        for name in COMPONENTS:
            tensor = self.components[name]
            if isinstance(tensor, TuckerTensor):
                tensor = tensor.full()
            compressed[name] = tucker_hosvd(tensor, tol)
        result = ToeplitzKernels(self.dims, compressed)
        ranks = {name: t.ranks for name, t in compressed.items()}
        logger.info(f"📊 Tucker kernels at tol {tol:g}: ranks {ranks}, "
                    f"compression factor {float(result.compression_factor()):.1f}")
        return result


def sphere_self_term(k0: float) -> complex:
    """Self interaction of a unit voxel from the equal-volume sphere, grid-normalised"""
    a = (3.0 / (4.0 * math.pi)) ** (1.0 / 3.0)
    return (2.0 / 3.0) * (1.0 + 1j * k0 * a) * np.exp(-1j * k0 * a) - 1.0


def galerkin_entries(offsets: np.ndarray, k0: float, near_radius: int = 2, order: int = 4) -> np.ndarray:
    """Voxel-voxel Galerkin blocks (N, 3, 3) for integer offsets in grid-normalised units.

    Offsets with max-norm up to ``near_radius`` use an order^3 x order^3 Gauss
    rule, farther offsets a single point, and the zero offset the sphere term.
    """
    offsets = np.asarray(offsets, dtype=float).reshape(-1, 3)
    out = np.empty((len(offsets), 3, 3), dtype=np.complex128)
    inf_norm = np.max(np.abs(offsets), axis=1)
    self_mask = inf_norm == 0
    near = (inf_norm <= near_radius) & ~self_mask
    far = ~near & ~self_mask

    if far.any():
        out[far] = dyadic_green(offsets[far], k0)
    if near.any():
        pts, w = voxel_rule(order)
        diff = pts[:, None, :] - pts[None, :, :]
        pair_weights = w[:, None] * w[None, :]
        for idx in np.flatnonzero(near):
            block = dyadic_green(offsets[idx] + diff, k0)
            out[idx] = np.einsum("ts,tsuv->uv", pair_weights, block)
    if self_mask.any():
        out[self_mask] = sphere_self_term(k0) * np.eye(3)
    return out


def _nonnegative_offsets(dims: Sequence[int]) -> np.ndarray:
    return np.indices(dims).reshape(3, -1, order="F").T


def _pack(dims: Tuple[int, int, int], blocks: np.ndarray) -> ToeplitzKernels:
    components = {}
    for name in COMPONENTS:
        u, v = "xyz".index(name[0]), "xyz".index(name[1])
        components[name] = DenseTensor(blocks[:, u, v].reshape(dims, order="F"))
    return ToeplitzKernels(dims, components)


def assemble_vie_kernels(grid: VoxelGrid, k0: float, near_radius: int = 2,
                         order: int = 4) -> ToeplitzKernels:
    """Galerkin kernels K/dV over all non-negative offsets of ``grid``"""
    k0n = k0 * grid.spacing
    logger.info(f"🚀 Assembling VIE kernels on {grid.dims} grid (k0*dx = {k0n:.4f})")
    blocks = galerkin_entries(_nonnegative_offsets(grid.dims), k0n, near_radius, order)
    kernels = _pack(grid.dims, blocks)
    logger.info(f"✅ VIE kernels assembled: {len(COMPONENTS)} x {grid.n_v:,} entries")
    return kernels


def assemble_point_kernels(dims: Sequence[int], k0n: float) -> ToeplitzKernels:
    """Grid point kernels G(o) with the zero offset removed, grid-normalised ``k0n``"""
    dims = tuple(int(n) for n in dims)
    offsets = _nonnegative_offsets(dims).astype(float)
    blocks = np.zeros((len(offsets), 3, 3), dtype=np.complex128)
    nonzero = np.any(offsets != 0, axis=1)
    blocks[nonzero] = dyadic_green(offsets[nonzero], k0n)
    return _pack(dims, blocks)
