"""
Solution metrics
Relative differences and absorbed power of body currents
"""
import numpy as np

from VSIE.errors import ArgumentError
from VSIE.kernels.geometry import VoxelGrid


def relative_difference(a: np.ndarray, b: np.ndarray) -> float:
    """||a - b|| / ||b||"""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ArgumentError(f"vectors differ in shape: {a.shape} vs {b.shape}")
    ref = float(np.linalg.norm(b))
    if ref == 0.0:
        raise ArgumentError("relative difference is undefined for a zero reference vector")
    return float(np.linalg.norm(a - b)) / ref


def absorbed_power(grid: VoxelGrid, j_b: np.ndarray) -> float:
    """Time-averaged power dissipated by body currents, solver units.

    With j = i w eps0 chi e per voxel the dissipation is
    0.5 |j|^2 Re(1 / (i chi)) = 0.5 |j|^2 (-Im chi) / |chi|^2, which is
    non-negative whenever Im(eps_r) <= 0.
    """
    j_b = np.asarray(j_b)
    if j_b.shape != (3 * grid.n_v,):
        raise ArgumentError(f"body vector has shape {j_b.shape}, expected ({3 * grid.n_v},)")
    chi = grid.chi_e.reshape(-1, order="F")
    occupied = np.abs(chi) > 0
    loss = np.zeros(grid.n_v)
    loss[occupied] = -chi[occupied].imag / np.abs(chi[occupied]) ** 2
    density = np.sum(np.abs(j_b.reshape(3, -1)) ** 2, axis=0)
    return float(0.5 * np.sum(loss * density) * grid.voxel_volume)
