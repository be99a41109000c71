"""
Surface EFIE blocks
Pulse-basis patch interactions with near-pair Gauss refinement and analytic self terms
"""
import logging

import numpy as np

from VSIE.errors import GeometryError
from VSIE.kernels.geometry import SurfaceMesh
from VSIE.kernels.green import dyadic_apply
from VSIE.kernels.quadrature import patch_points

logger = logging.getLogger(__name__)

NEAR_PAIR_FACTOR = 2.0


def self_terms(mesh: SurfaceMesh, k0: float) -> np.ndarray:
    """Diagonal entries: rectangle potential integral plus the edge-charge field at the centroid"""
    L, w, A = mesh.lengths, mesh.widths, mesh.areas
    alpha, beta = 0.5 * L, 0.5 * w
    psi = (alpha * np.arcsinh(beta / alpha) + beta * np.arcsinh(alpha / beta)) / np.pi
    scalar = k0 ** 2 * psi - 1j * k0 ** 3 * A / (4.0 * np.pi)
    edge = -2.0 * w / (np.pi * L * np.sqrt(L ** 2 + w ** 2))
    return A * (scalar + edge)


def surface_pair_entries(mesh_a: SurfaceMesh, rows: np.ndarray, mesh_b: SurfaceMesh,
                         cols: np.ndarray, k0: float) -> np.ndarray:
    """Z entries for index pairs (rows[k], cols[k]); self pairs only when mesh_a is mesh_b"""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    out = np.empty(len(rows), dtype=np.complex128)
    same = (rows == cols) if mesh_a is mesh_b else np.zeros(len(rows), dtype=bool)

    d = mesh_a.centroids[rows] - mesh_b.centroids[cols]
    dist = np.linalg.norm(d, axis=1)
    reach = NEAR_PAIR_FACTOR * np.maximum(mesh_a.diameters[rows], mesh_b.diameters[cols])
    coincident = ~same & (dist <= 1e-9 * reach)
    if coincident.any():
        k = int(np.flatnonzero(coincident)[0])
        raise GeometryError(
            f"patch {rows[k]} of '{mesh_a.name}' overlaps patch {cols[k]} of '{mesh_b.name}'"
        )
    near = ~same & (dist < reach)
    far = ~same & ~near
    weight = mesh_a.areas[rows] * mesh_b.areas[cols]

    if far.any():
        field = dyadic_apply(d[far], k0, mesh_b.tangents[cols[far]])
        out[far] = weight[far] * np.sum(mesh_a.tangents[rows[far]] * field, axis=1)
    if near.any():
        pa, wa = patch_points(mesh_a, 4, rows[near])
        pb, wb = patch_points(mesh_b, 4, cols[near])
        sep = pa[:, :, None, :] - pb[:, None, :, :]
        field = dyadic_apply(sep, k0, mesh_b.tangents[cols[near]][:, None, None, :])
        tested = np.einsum("pstk,pk->pst", field, mesh_a.tangents[rows[near]])
        out[near] = weight[near] * np.einsum("s,t,pst->p", wa, wb, tested)
    if same.any():
        out[same] = self_terms(mesh_a, k0)[rows[same]]
    return out


def surface_block(mesh_a: SurfaceMesh, mesh_b: SurfaceMesh, k0: float) -> np.ndarray:
    """EFIE interaction matrix between two meshes (m_a x m_b); diagonal block when mesh_a is mesh_b"""
    if mesh_a.m == 0 or mesh_b.m == 0:
        return np.zeros((mesh_a.m, mesh_b.m), dtype=np.complex128)
    rows = np.repeat(np.arange(mesh_a.m), mesh_b.m)
    cols = np.tile(np.arange(mesh_b.m), mesh_a.m)
    block = surface_pair_entries(mesh_a, rows, mesh_b, cols, k0).reshape(mesh_a.m, mesh_b.m)
    logger.debug(f"Surface block '{mesh_a.name}' x '{mesh_b.name}': {block.shape}")
    return block
