"""
Coupling oracle
Voxel-averaged electric field radiated by unit patch currents (the Z_cb entries)
"""
from typing import Callable

import numpy as np

from VSIE.errors import ArgumentError
from VSIE.kernels.geometry import SurfaceMesh, VoxelGrid
from VSIE.kernels.green import dyadic_apply
from VSIE.kernels.quadrature import patch_points, voxel_rule_for_count

FAR_POLICY = (1, 1)
NEAR_POLICY = (8, 5)
CHUNK = 4096


def coupling_fields(grid: VoxelGrid, mesh: SurfaceMesh, voxels: np.ndarray, patches: np.ndarray,
                    k0: float, volume_points: int = 1, surface_points: int = 1) -> np.ndarray:
    """All three field components (N, 3) for voxel multi-indices (N, 3) and patch indices (N,)"""
    voxels = np.asarray(voxels, dtype=np.int64).reshape(-1, 3)
    patches = np.asarray(patches, dtype=np.int64).reshape(-1)
    if len(voxels) != len(patches):
        raise ArgumentError(f"{len(voxels)} voxels for {len(patches)} patches")
    if np.any(voxels < 0) or np.any(voxels >= np.asarray(grid.dims)):
        raise ArgumentError(f"voxel index outside grid {grid.dims}")
    if np.any(patches < 0) or np.any(patches >= mesh.m):
        raise ArgumentError(f"patch index outside mesh of {mesh.m} patches")

    offsets, vol_w = voxel_rule_for_count(volume_points)
    offsets = offsets * grid.spacing
    out = np.empty((len(patches), 3), dtype=np.complex128)
    for start in range(0, len(patches), CHUNK):
        sl = slice(start, start + CHUNK)
        p = patches[sl]
        centers = grid.origin + grid.spacing * voxels[sl]
        src, surf_w = patch_points(mesh, surface_points, p)
        d = centers[:, None, None, :] + offsets[None, :, None, :] - src[:, None, :, :]
        field = dyadic_apply(d, k0, mesh.tangents[p][:, None, None, :])
        out[sl] = mesh.areas[p][:, None] * np.einsum("v,s,nvsk->nk", vol_w, surf_w, field)
    return out


def coupling_entries(grid: VoxelGrid, mesh: SurfaceMesh, voxels: np.ndarray, patches: np.ndarray,
                     components, k0: float, volume_points: int = 1,
                     surface_points: int = 1) -> np.ndarray:
    """Batched coupling entries; ``components`` are 0-based (x = 0)"""
    components = np.broadcast_to(np.asarray(components, dtype=np.int64), np.shape(patches))
    if np.any((components < 0) | (components > 2)):
        raise ArgumentError("field component must be 0, 1 or 2")
    fields = coupling_fields(grid, mesh, voxels, patches, k0, volume_points, surface_points)
    return fields[np.arange(len(fields)), components.reshape(-1)]


def coupling_entry(grid: VoxelGrid, mesh: SurfaceMesh, i, p: int, component: int, k0: float,
                   volume_points: int = 1, surface_points: int = 1) -> complex:
    value = coupling_entries(grid, mesh, np.asarray(i)[None, :], np.array([p]), component, k0,
                             volume_points, surface_points)
    return complex(value[0])


def coupling_matrix(grid: VoxelGrid, mesh: SurfaceMesh, k0: float, voxel_ids: np.ndarray = None,
                    policy=FAR_POLICY) -> np.ndarray:
    """Dense C with component-major rows over ``voxel_ids`` (linear, default all voxels) and one column per patch"""
    if voxel_ids is None:
        voxel_ids = np.arange(grid.n_v)
    voxel_ids = np.asarray(voxel_ids, dtype=np.int64)
    multi = grid.multi_index(voxel_ids)
    n = len(voxel_ids)
    out = np.empty((3 * n, mesh.m), dtype=np.complex128)
    for p in range(mesh.m):
        fields = coupling_fields(grid, mesh, multi, np.full(n, p), k0, *policy)
        out[:, p] = fields.reshape(-1, order="F")
    return out


def coupling_tensor_entry(grid: VoxelGrid, mesh: SurfaceMesh, k0: float, component: int,
                          policy=FAR_POLICY) -> Callable[[np.ndarray], np.ndarray]:
    """Entry function of the 4-way tensor (i1, i2, i3, p) for one field component"""

    def entry(indices: np.ndarray) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        return coupling_fields(grid, mesh, indices[:, :3], indices[:, 3], k0, *policy)[:, component]

    return entry
