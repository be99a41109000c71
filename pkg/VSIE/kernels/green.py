"""
Free-space Green's function
Scalar kernel g = exp(-i k0 R) / (4 pi R) and the closed-form dyadic k0^2 g I + grad grad g
"""
import numpy as np

from VSIE.errors import SingularityError


def _distance(d: np.ndarray) -> np.ndarray:
    R = np.linalg.norm(d, axis=-1)
    if np.any(R == 0.0):
        raise SingularityError("Green's function evaluated at coincident points (R == 0)")
    return R


def green_scalar(r, rp, k0: float):
    """g(r, r') for points or arrays of points with trailing axis 3"""
    d = np.asarray(r, dtype=float) - np.asarray(rp, dtype=float)
    R = _distance(d)
    g = np.exp(-1j * k0 * R) / (4.0 * np.pi * R)
    return complex(g) if np.ndim(g) == 0 else g


def _radial_factors(d: np.ndarray, k0: float):
    R = _distance(d)
    g = np.exp(-1j * k0 * R) / (4.0 * np.pi * R)
    ikR = 1j * k0 / R
    invR2 = 1.0 / R ** 2
    iso = g * (k0 ** 2 - ikR - invR2)
    rad = g * (-k0 ** 2 + 3.0 * ikR + 3.0 * invR2)
    return iso, rad, d / R[..., None]


def dyadic_green(d, k0: float) -> np.ndarray:
    """k0^2 g I + grad grad g at separations ``d`` (..., 3) -> (..., 3, 3)"""
    d = np.asarray(d, dtype=float)
    iso, rad, rhat = _radial_factors(d, k0)
    out = rad[..., None, None] * rhat[..., :, None] * rhat[..., None, :]
    out = out + iso[..., None, None] * np.eye(3)
    return out


def dyadic_apply(d, k0: float, t) -> np.ndarray:
    """Dyadic times a vector without forming the 3x3 blocks; ``t`` broadcasts against ``d``"""
    d = np.asarray(d, dtype=float)
    t = np.asarray(t)
    iso, rad, rhat = _radial_factors(d, k0)
    proj = np.sum(rhat * t, axis=-1)
    return iso[..., None] * t + (rad * proj)[..., None] * rhat
