"""
Delta-gap excitations
Port vectors per mesh and the stacked (v_f | v_n) right-hand side
"""
from typing import Sequence, Tuple

import numpy as np

from VSIE.errors import ArgumentError
from VSIE.kernels.geometry import FAR, NEAR, SurfaceMesh


def excitation_vector(mesh: SurfaceMesh, port: int) -> np.ndarray:
    """+-1 on the port patch along its gap direction, 0 elsewhere"""
    if not 0 <= port < len(mesh.ports):
        raise ArgumentError(f"port {port} not defined on mesh '{mesh.name}' ({len(mesh.ports)} ports)")
    gap = mesh.ports[port]
    v = np.zeros(mesh.m, dtype=np.complex128)
    v[gap.patch] = float(gap.sign)
    return v


def stacked_excitation(far: SurfaceMesh, near: SurfaceMesh, amplitudes: Sequence[Tuple[str, int, complex]]
                       ) -> Tuple[np.ndarray, np.ndarray]:
    """Superpose (tag, port, amplitude) excitations into (v_f, v_n)"""
    v_f = np.zeros(far.m, dtype=np.complex128)
    v_n = np.zeros(near.m, dtype=np.complex128)
    for tag, port, amplitude in amplitudes:
        if tag == FAR:
            v_f += amplitude * excitation_vector(far, port)
        elif tag == NEAR:
            v_n += amplitude * excitation_vector(near, port)
        else:
            raise ArgumentError(f"unknown domain tag '{tag}'")
    return v_f, v_n
