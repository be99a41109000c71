"""
Geometry and material model
Frequency, voxelised bodies and flat-patch conductor meshes
"""
import math
from dataclasses import dataclass, field, replace
from typing import List, Sequence, Tuple

import numpy as np
from scipy import constants

from VSIE.errors import ArgumentError, GeometryError

NEAR = "near"
FAR = "far"


@dataclass(frozen=True)
class Frequency:
    f: float

    def __post_init__(self):
        if not self.f > 0:
            raise ArgumentError(f"frequency must be positive, got {self.f}")

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.f

    @property
    def k0(self) -> float:
        return self.omega * math.sqrt(constants.mu_0 * constants.epsilon_0)

    @property
    def wavelength(self) -> float:
        return 2.0 * math.pi / self.k0


def complex_permittivity(eps_real, sigma, frequency: Frequency):
    """eps_r = eps' - i sigma / (omega eps0), e^{+i omega t} convention"""
    return np.asarray(eps_real) - 1j * np.asarray(sigma) / (frequency.omega * constants.epsilon_0)


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """Uniform voxel grid; ``origin`` is the centre of voxel (0, 0, 0)"""

    dims: Tuple[int, int, int]
    spacing: float
    origin: np.ndarray
    eps_r: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        if len(dims) != 3 or any(n <= 0 for n in dims):
            raise GeometryError(f"grid dims must be three positive integers, got {self.dims}")
        if not self.spacing > 0:
            raise GeometryError(f"grid spacing must be positive, got {self.spacing}")
        mask = np.asarray(self.mask, dtype=bool)
        eps_r = np.asarray(self.eps_r, dtype=np.complex128)
        if mask.shape != dims or eps_r.shape != dims:
            raise GeometryError(f"eps_r {eps_r.shape} and mask {mask.shape} must match dims {dims}")
        eps_r = np.where(mask, eps_r, 1.0 + 0.0j)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float).reshape(3))
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "eps_r", eps_r)

    @classmethod
    def vacuum(cls, dims: Sequence[int], spacing: float, origin=(0.0, 0.0, 0.0)) -> "VoxelGrid":
        dims = tuple(int(n) for n in dims)
        return cls(dims, spacing, np.asarray(origin, dtype=float),
                   np.ones(dims, dtype=np.complex128), np.zeros(dims, dtype=bool))

    @property
    def n_v(self) -> int:
        return int(np.prod(self.dims))

    @property
    def voxel_volume(self) -> float:
        return self.spacing ** 3

    @property
    def chi_e(self) -> np.ndarray:
        return np.where(self.mask, self.eps_r - 1.0, 0.0 + 0.0j)

    def centers(self) -> np.ndarray:
        """Voxel centres, (n_v, 3), column-major voxel order"""
        idx = np.indices(self.dims).reshape(3, -1, order="F").T
        return self.origin + self.spacing * idx

    def multi_index(self, linear: np.ndarray) -> np.ndarray:
        return np.stack(np.unravel_index(np.asarray(linear), self.dims, order="F"), axis=-1)

    def linear_index(self, multi: np.ndarray) -> np.ndarray:
        multi = np.asarray(multi)
        return np.ravel_multi_index(tuple(multi[..., a] for a in range(3)), self.dims, order="F")

    def to_index_space(self, points: np.ndarray) -> np.ndarray:
        """Continuous voxel coordinates of physical points"""
        return (np.asarray(points) - self.origin) / self.spacing

    def normalized(self) -> "VoxelGrid":
        """Same grid in units of the voxel spacing"""
        return replace(self, spacing=1.0, origin=self.origin / self.spacing)

    def padded(self, low: Sequence[int], high: Sequence[int]) -> "VoxelGrid":
        """Grid extended by vacuum voxels"""
        low, high = [int(v) for v in low], [int(v) for v in high]
        pad = list(zip(low, high))
        return VoxelGrid(
            dims=tuple(n + a + b for n, a, b in zip(self.dims, low, high)),
            spacing=self.spacing,
            origin=self.origin - self.spacing * np.asarray(low, dtype=float),
            eps_r=np.pad(self.eps_r, pad, constant_values=1.0),
            mask=np.pad(self.mask, pad, constant_values=False),
        )

    def occupied(self) -> np.ndarray:
        """Linear indices of body voxels, ascending"""
        return np.flatnonzero(self.mask.reshape(-1, order="F"))

    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        occupied = self.occupied()
        if occupied.size == 0:
            raise GeometryError("body mask is empty")
        pts = self.centers()[occupied]
        half = 0.5 * self.spacing
        return pts.min(axis=0) - half, pts.max(axis=0) + half

    def max_extent(self) -> float:
        lo, hi = self.bounding_box()
        return float(np.max(hi - lo))


@dataclass(frozen=True)
class Port:
    """Delta-gap port on one patch; ``sign`` is the gap direction along the patch current"""

    patch: int
    sign: int = 1
    name: str = ""


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    """Flat quadrilateral patches, one pulse current unknown each.

    ``tangents`` is the current direction, ``binormals`` the second in-plane
    direction; ``lengths``/``widths`` are the patch extents along them.
    """

    vertices: np.ndarray
    tangents: np.ndarray
    binormals: np.ndarray
    normals: np.ndarray
    centroids: np.ndarray
    areas: np.ndarray
    lengths: np.ndarray
    widths: np.ndarray
    tag: str = NEAR
    name: str = ""
    ports: Tuple[Port, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.tag not in (NEAR, FAR):
            raise GeometryError(f"domain tag must be '{NEAR}' or '{FAR}', got '{self.tag}'")
        if np.any(self.areas <= 0):
            bad = int(np.flatnonzero(self.areas <= 0)[0])
            raise GeometryError(f"patch {bad} of mesh '{self.name}' has non-positive area")
        for port in self.ports:
            if not 0 <= port.patch < self.m:
                raise GeometryError(f"port '{port.name}' references patch {port.patch} outside mesh '{self.name}'")
            if port.sign not in (-1, 1):
                raise GeometryError(f"port '{port.name}' gap direction must be +1 or -1")

    @classmethod
    def from_quads(cls, vertices: np.ndarray, directions: np.ndarray, tag: str = NEAR,
                   name: str = "", ports: Sequence[Port] = ()) -> "SurfaceMesh":
        """Build a mesh from (m, 4, 3) vertex loops and per-patch current direction hints"""
        vertices = np.asarray(vertices, dtype=float)
        if vertices.ndim != 3 or vertices.shape[1:] != (4, 3):
            raise GeometryError(f"expected (m, 4, 3) vertices, got {vertices.shape}")
        cross = np.cross(vertices[:, 2] - vertices[:, 0], vertices[:, 3] - vertices[:, 1])
        doubled = np.linalg.norm(cross, axis=1)
        if np.any(doubled <= 0):
            raise GeometryError(f"mesh '{name}' contains degenerate patches")
        normals = cross / doubled[:, None]
        hint = np.asarray(directions, dtype=float)
        tangents = hint - np.sum(hint * normals, axis=1)[:, None] * normals
        tnorm = np.linalg.norm(tangents, axis=1)
        if np.any(tnorm <= 0):
            raise GeometryError(f"mesh '{name}' has a current direction normal to its patch")
        tangents = tangents / tnorm[:, None]
        binormals = np.cross(normals, tangents)
        centroids = vertices.mean(axis=1)
        areas = 0.5 * doubled
        proj = np.einsum("mvk,mk->mv", vertices, binormals)
        widths = proj.max(axis=1) - proj.min(axis=1)
        lengths = areas / widths
        return cls(vertices, tangents, binormals, normals, centroids, areas, lengths, widths,
                   tag, name, tuple(ports))

    @property
    def m(self) -> int:
        return int(self.centroids.shape[0])

    @property
    def diameters(self) -> np.ndarray:
        return np.hypot(self.lengths, self.widths)

    def scaled(self, factor: float) -> "SurfaceMesh":
        return replace(
            self,
            vertices=self.vertices * factor,
            centroids=self.centroids * factor,
            areas=self.areas * factor ** 2,
            lengths=self.lengths * factor,
            widths=self.widths * factor,
        )

    def translated(self, shift: np.ndarray) -> "SurfaceMesh":
        shift = np.asarray(shift, dtype=float)
        return replace(self, vertices=self.vertices + shift, centroids=self.centroids + shift)

    def with_tag(self, tag: str) -> "SurfaceMesh":
        return replace(self, tag=tag)

    def distance_to_box(self, lo: np.ndarray, hi: np.ndarray) -> float:
        """Minimum distance from any patch vertex or centroid to an axis-aligned box"""
        pts = np.vstack([self.vertices.reshape(-1, 3), self.centroids])
        outside = np.maximum(np.maximum(lo - pts, pts - hi), 0.0)
        return float(np.min(np.linalg.norm(outside, axis=1)))


def concatenate_meshes(meshes: Sequence[SurfaceMesh], tag: str, name: str = "") -> SurfaceMesh:
    """Stack meshes into one; ports are re-indexed"""
    if not meshes:
        empty = np.zeros((0, 3))
        return SurfaceMesh(np.zeros((0, 4, 3)), empty, empty, empty, empty, np.zeros(0),
                           np.zeros(0), np.zeros(0), tag, name, ())
    ports: List[Port] = []
    offset = 0
    for mesh in meshes:
        ports.extend(Port(p.patch + offset, p.sign, p.name) for p in mesh.ports)
        offset += mesh.m

    def stack(attr):
        return np.concatenate([getattr(mesh, attr) for mesh in meshes], axis=0)

    return SurfaceMesh(stack("vertices"), stack("tangents"), stack("binormals"), stack("normals"),
                       stack("centroids"), stack("areas"), stack("lengths"), stack("widths"),
                       tag, name, tuple(ports))
