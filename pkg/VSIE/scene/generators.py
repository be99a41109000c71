"""
Geometry generators
Flat-patch loop rings, open cylindrical shells and rasterised sphere phantoms
"""
import logging
from typing import Sequence, Tuple

import numpy as np

from VSIE.errors import GeometryError
from VSIE.kernels.geometry import NEAR, Port, SurfaceMesh, VoxelGrid

logger = logging.getLogger(__name__)


def _frame(axis: Sequence[float]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Right-handed (e1, e2, axis); e1 = x for the z axis"""
    a = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(a)
    if norm == 0:
        raise GeometryError("axis vector must be non-zero")
    a = a / norm
    ref = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = ref - np.dot(ref, a) * a
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(a, e1), a


def loop_mesh(center: Sequence[float], radius: float, width: float, patches: int,
              normal: Sequence[float] = (0.0, 0.0, 1.0), tag: str = NEAR, name: str = "loop",
              ports: Sequence[Port] = ()) -> SurfaceMesh:
    """Flat annular strip split into ``patches`` trapezoids; current runs azimuthally"""
    if radius <= 0 or width <= 0 or width >= 2 * radius:
        raise GeometryError(f"loop '{name}' needs 0 < width < 2*radius, got radius {radius}, width {width}")
    if patches < 3:
        raise GeometryError(f"loop '{name}' needs at least 3 patches, got {patches}")
    e1, e2, _ = _frame(normal)
    c = np.asarray(center, dtype=float)
    theta = 2.0 * np.pi * np.arange(patches + 1) / patches
    theta[-1] = 0.0
    radial = np.cos(theta)[:, None] * e1 + np.sin(theta)[:, None] * e2
    inner = c + (radius - 0.5 * width) * radial
    outer = c + (radius + 0.5 * width) * radial
    vertices = np.stack([inner[:-1], outer[:-1], outer[1:], inner[1:]], axis=1)
    mid = 2.0 * np.pi * (np.arange(patches) + 0.5) / patches
    directions = -np.sin(mid)[:, None] * e1 + np.cos(mid)[:, None] * e2
    return SurfaceMesh.from_quads(vertices, directions, tag=tag, name=name, ports=ports)


def shell_mesh(center: Sequence[float], radius: float, length: float, axial: int, azimuthal: int,
               axis: Sequence[float] = (0.0, 0.0, 1.0), tag: str = NEAR, name: str = "shell",
               ports: Sequence[Port] = ()) -> SurfaceMesh:
    """Open cylinder of axial x azimuthal flat patches with azimuthal current"""
    if radius <= 0 or length <= 0:
        raise GeometryError(f"shell '{name}' needs positive radius and length, got {radius}, {length}")
    if axial < 1 or azimuthal < 3:
        raise GeometryError(f"shell '{name}' needs >= 1 axial and >= 3 azimuthal patches")
    e1, e2, a = _frame(axis)
    c = np.asarray(center, dtype=float)
    theta = 2.0 * np.pi * np.arange(azimuthal + 1) / azimuthal
    theta[-1] = 0.0
    z = np.linspace(-0.5 * length, 0.5 * length, axial + 1)
    ring = radius * (np.cos(theta)[:, None] * e1 + np.sin(theta)[:, None] * e2)
    points = c + ring[None, :, :] + z[:, None, None] * a
    vertices = np.stack([points[:-1, :-1], points[:-1, 1:], points[1:, 1:], points[1:, :-1]], axis=2)
    vertices = vertices.reshape(-1, 4, 3)
    mid = 2.0 * np.pi * (np.arange(azimuthal) + 0.5) / azimuthal
    tangent = -np.sin(mid)[:, None] * e1 + np.cos(mid)[:, None] * e2
    directions = np.tile(tangent, (axial, 1))
    return SurfaceMesh.from_quads(vertices, directions, tag=tag, name=name, ports=ports)


def sphere_phantom(dims: Sequence[int], spacing: float, origin: Sequence[float],
                   center: Sequence[float], radius: float, eps_r: complex) -> VoxelGrid:
    """Voxels whose centres fall strictly inside the sphere get ``eps_r``"""
    if radius < 0:
        raise GeometryError(f"sphere radius must be non-negative, got {radius}")
    grid = VoxelGrid.vacuum(dims, spacing, origin)
    dist = np.linalg.norm(grid.centers() - np.asarray(center, dtype=float), axis=1)
    mask = (dist < radius).reshape(grid.dims, order="F")
    eps = np.where(mask, complex(eps_r), 1.0 + 0.0j)
    body = VoxelGrid(grid.dims, spacing, grid.origin, eps, mask)
    logger.info(f"📊 Sphere phantom: {int(mask.sum()):,} of {grid.n_v:,} voxels occupied")
    return body


def permittivity_body(eps_r: np.ndarray, spacing: float, origin: Sequence[float]) -> VoxelGrid:
    """Body from an explicit permittivity map; voxels with eps_r == 1 are vacuum"""
    eps_r = np.asarray(eps_r, dtype=np.complex128)
    if eps_r.ndim != 3:
        raise GeometryError(f"permittivity map must be 3-dimensional, got shape {eps_r.shape}")
    return VoxelGrid(eps_r.shape, spacing, np.asarray(origin, dtype=float), eps_r, eps_r != 1.0)
