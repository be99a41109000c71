"""
Quadrature rules
Gauss-Legendre voxel rules and quadrilateral patch rules, weights normalised to sum to one
"""
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.special import roots_legendre

from VSIE.errors import ArgumentError
from VSIE.kernels.geometry import SurfaceMesh

PATCH_RULES = (1, 4, 5)


@lru_cache(maxsize=None)
def gauss_unit(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """n-point Gauss-Legendre on [-1/2, 1/2]"""
    if n < 1:
        raise ArgumentError(f"need at least one Gauss point, got {n}")
    x, w = roots_legendre(n)
    return 0.5 * x, 0.5 * w


@lru_cache(maxsize=None)
def voxel_rule(points_per_axis: int) -> Tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss rule on the unit voxel centred at the origin: offsets (q, 3), weights (q,)"""
    x, w = gauss_unit(points_per_axis)
    grid = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
    weights = np.einsum("i,j,k->ijk", w, w, w).reshape(-1)
    return grid, weights


def voxel_rule_for_count(count: int) -> Tuple[np.ndarray, np.ndarray]:
    per_axis = round(count ** (1.0 / 3.0))
    if per_axis ** 3 != count:
        raise ArgumentError(f"volume point count must be a cube, got {count}")
    return voxel_rule(per_axis)


@lru_cache(maxsize=None)
def _reference_patch_rule(points: int) -> Tuple[np.ndarray, np.ndarray]:
    """Rule on the reference square [-1, 1]^2"""
    if points == 1:
        return np.zeros((1, 2)), np.ones(1)
    if points == 4:
        x, w = roots_legendre(2)
        xi, eta = np.meshgrid(x, x, indexing="ij")
        return np.stack([xi.ravel(), eta.ravel()], axis=1), np.outer(w, w).ravel() / 4.0
    if points == 5:
        a = 1.0 / np.sqrt(2.0)
        pts = np.array([[0.0, 0.0], [-a, -a], [a, -a], [a, a], [-a, a]])
        weights = np.array([4.0 / 3.0] + [2.0 / 3.0] * 4) / 4.0
        return pts, weights
    raise ArgumentError(f"unsupported patch rule with {points} points, choose one of {PATCH_RULES}")


def patch_points(mesh: SurfaceMesh, points: int = 1, patches=None) -> Tuple[np.ndarray, np.ndarray]:
    """Bilinear-mapped quadrature points (P, q, 3) and weights (q,) for the selected patches"""
    ref, weights = _reference_patch_rule(points)
    if patches is None:
        patches = np.arange(mesh.m)
    verts = mesh.vertices[patches]
    xi, eta = ref[:, 0], ref[:, 1]
    shape = np.stack([
        (1 - xi) * (1 - eta),
        (1 + xi) * (1 - eta),
        (1 + xi) * (1 + eta),
        (1 - xi) * (1 + eta),
    ], axis=1) / 4.0
    if points == 1:
        return mesh.centroids[patches][:, None, :], weights
    return np.einsum("qa,pak->pqk", shape, verts), weights
