"""
Scene documents
JSON scene parsing with key/line diagnostics, near/far tagging and scene construction
"""
import copy
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from config.solver import SolverConfig
from VSIE.errors import GeometryError, SceneError
from VSIE.kernels.excitation import stacked_excitation
from VSIE.kernels.geometry import (FAR, NEAR, Frequency, Port, SurfaceMesh, VoxelGrid,
                                   complex_permittivity, concatenate_meshes)
from VSIE.operators.pfft import margin_violations
from VSIE.scene.generators import loop_mesh, permittivity_body, shell_mesh, sphere_phantom

logger = logging.getLogger(__name__)

AUTO = "auto"
FAR_THRESHOLD_FACTOR = 0.3

TOP_KEYS = {"frequency", "grid", "body", "surfaces", "ports", "far_threshold", "solver", "output"}
GRID_KEYS = {"dims", "spacing", "origin"}
BODY_KEYS = {
    "sphere": {"type", "center", "radius", "eps_r", "eps_real", "sigma"},
    "file": {"type", "path"},
}
SURFACE_KEYS = {
    "loop": {"type", "name", "tag", "center", "radius", "width", "patches", "normal"},
    "shell": {"type", "name", "tag", "center", "radius", "length", "axial", "azimuthal", "axis"},
}
PORT_KEYS = {"name", "surface", "patch", "direction", "amplitude"}
SOLVER_DEFAULTS = {
    "tol_gmres": None, "restart": None, "max_cycles": None, "tol_tt": None, "tol_aca": None,
    "tol_tucker": None, "seed": None, "workers": None, "dense_limit": None,
    "coupling_mode": "tt", "near_mode": "pfft", "stencil": 5, "extend": False, "recompress": False,
    "surface_scaling": "block",
}
OUTPUT_DEFAULTS = {"dir": None, "currents": "currents.vsie", "report": "report.txt", "csv": False}


@dataclass
class SurfaceSpec:
    kind: str
    name: str
    tag: str
    params: Dict[str, Any]


@dataclass
class PortSpec:
    name: str
    surface: str
    patch: int
    direction: int = 1
    amplitude: complex = 1.0 + 0.0j


@dataclass
class SceneConfig:
    frequency: float
    dims: Tuple[int, int, int]
    spacing: float
    origin: Tuple[float, float, float]
    body: Optional[Dict[str, Any]]
    surfaces: List[SurfaceSpec]
    ports: List[PortSpec]
    far_threshold: Optional[float]
    solver: Dict[str, Any]
    output: Dict[str, Any]
    raw: Dict[str, Any] = field(default_factory=dict, repr=False)
    base_dir: Path = field(default_factory=Path)


@dataclass
class Scene:
    """Built scene: physical-unit body grid, tagged meshes and port excitations"""

    config: SceneConfig
    frequency: Frequency
    grid: VoxelGrid
    far: SurfaceMesh
    near: SurfaceMesh
    tags: Dict[str, str]
    amplitudes: Dict[str, complex]
    warnings: List[str] = field(default_factory=list)

    def normalized(self) -> Tuple[VoxelGrid, SurfaceMesh, SurfaceMesh, float]:
        """Grid, far mesh, near mesh and wavenumber in units of the voxel size"""
        dx = self.grid.spacing
        return (self.grid.normalized(), self.far.scaled(1.0 / dx), self.near.scaled(1.0 / dx),
                self.frequency.k0 * dx)

    def excitation(self) -> Tuple[np.ndarray, np.ndarray]:
        """(v_f, v_n) superposing every port with its amplitude"""
        items = []
        for tag, mesh in ((FAR, self.far), (NEAR, self.near)):
            for index, port in enumerate(mesh.ports):
                items.append((tag, index, self.amplitudes[port.name]))
        return stacked_excitation(self.far, self.near, items)


class _Document:
    """Key/line bookkeeping over the source text"""

    def __init__(self, text: str):
        self.text = text

    def line_of(self, path: List[str]) -> Optional[int]:
        pos, found = 0, False
        for key in path:
            idx = self.text.find(f'"{key}"', pos)
            if idx < 0:
                break
            pos, found = idx, True
        return self.text.count("\n", 0, pos) + 1 if found else None

    def fail(self, message: str, path: List[str]) -> SceneError:
        return SceneError(message, key=".".join(path), line=self.line_of(path))


def _reject_unknown(doc: _Document, section: Dict, allowed, path: List[str]):
    for key in section:
        if key not in allowed:
            raise doc.fail(f"unknown key '{key}'", path + [key])


def _require(doc: _Document, section: Dict, key: str, path: List[str]):
    if key not in section:
        raise doc.fail(f"missing required key '{key}'", path + [key])
    return section[key]


def _number(doc: _Document, value, path: List[str], positive=False, nonnegative=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise doc.fail(f"expected a number, got {value!r}", path)
    if positive and not value > 0:
        raise doc.fail(f"must be positive, got {value}", path)
    if nonnegative and value < 0:
        raise doc.fail(f"must be non-negative, got {value}", path)
    return float(value)


def _integer(doc: _Document, value, path: List[str], minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise doc.fail(f"expected an integer >= {minimum}, got {value!r}", path)
    return int(value)


def _vector(doc: _Document, value, path: List[str]) -> Tuple[float, float, float]:
    if not isinstance(value, list) or len(value) != 3:
        raise doc.fail(f"expected a 3-vector, got {value!r}", path)
    return tuple(_number(doc, v, path) for v in value)


def _complex(doc: _Document, value, path: List[str]) -> complex:
    if isinstance(value, list) and len(value) == 2:
        return complex(_number(doc, value[0], path), _number(doc, value[1], path))
    return complex(_number(doc, value, path))


def parse_scene(text: str, base_dir: Optional[Path] = None) -> SceneConfig:
    """Parse and validate a JSON scene document, filling defaults"""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise SceneError(f"malformed scene document: {e.msg}", line=e.lineno)
    return parse_scene_dict(raw, text, base_dir)


def parse_scene_dict(raw: Dict[str, Any], text: Optional[str] = None,
                     base_dir: Optional[Path] = None) -> SceneConfig:
    doc = _Document(text if text is not None else json.dumps(raw, indent=2))
    if not isinstance(raw, dict):
        raise SceneError("scene document must be a JSON object", line=1)
    _reject_unknown(doc, raw, TOP_KEYS, [])

    frequency = _number(doc, _require(doc, raw, "frequency", []), ["frequency"], positive=True)

    grid = _require(doc, raw, "grid", [])
    _reject_unknown(doc, grid, GRID_KEYS, ["grid"])
    dims_raw = _require(doc, grid, "dims", ["grid"])
    if not isinstance(dims_raw, list) or len(dims_raw) != 3:
        raise doc.fail("grid dims must list three extents", ["grid", "dims"])
    dims = tuple(_integer(doc, n, ["grid", "dims"]) for n in dims_raw)
    spacing = _number(doc, _require(doc, grid, "spacing", ["grid"]), ["grid", "spacing"], positive=True)
    origin = _vector(doc, grid.get("origin", [0.0, 0.0, 0.0]), ["grid", "origin"])

    body = raw.get("body")
    if body is not None:
        kind = body.get("type", "sphere")
        if kind not in BODY_KEYS:
            raise doc.fail(f"unknown body type '{kind}'", ["body", "type"])
        _reject_unknown(doc, body, BODY_KEYS[kind], ["body"])
        body = _parse_body(doc, body, kind)

    surfaces = _parse_surfaces(doc, raw.get("surfaces", []))
    ports = _parse_ports(doc, raw.get("ports", []), surfaces)

    far_threshold = raw.get("far_threshold")
    if far_threshold is not None:
        far_threshold = _number(doc, far_threshold, ["far_threshold"], nonnegative=True)

    env_config = SolverConfig()
    env = env_config.as_dict()
    solver = dict(SOLVER_DEFAULTS)
    solver_raw = raw.get("solver", {})
    _reject_unknown(doc, solver_raw, SOLVER_DEFAULTS, ["solver"])
    solver.update(solver_raw)
    for key, value in env.items():
        if solver.get(key) is None:
            solver[key] = value
    for key in ("tol_gmres", "tol_tt", "tol_aca", "tol_tucker"):
        solver[key] = _number(doc, solver[key], ["solver", key], positive=True)
    for key in ("restart", "max_cycles", "workers", "dense_limit", "stencil"):
        solver[key] = _integer(doc, solver[key], ["solver", key])
    solver["seed"] = _integer(doc, solver["seed"], ["solver", "seed"], minimum=0)
    if solver["coupling_mode"] not in ("tt", "aca"):
        raise doc.fail("coupling_mode must be 'tt' or 'aca'", ["solver", "coupling_mode"])
    if solver["near_mode"] not in ("pfft", "dense"):
        raise doc.fail("near_mode must be 'pfft' or 'dense'", ["solver", "near_mode"])
    if solver["surface_scaling"] not in ("block", "diagonal", "none"):
        raise doc.fail("surface_scaling must be 'block', 'diagonal' or 'none'", ["solver", "surface_scaling"])

    output = dict(OUTPUT_DEFAULTS)
    output_raw = raw.get("output", {})
    _reject_unknown(doc, output_raw, OUTPUT_DEFAULTS, ["output"])
    output.update(output_raw)
    if output["dir"] is None:
        output["dir"] = env_config.output_dir

    return SceneConfig(frequency, dims, spacing, origin, body, surfaces, ports, far_threshold,
                       solver, output, raw=copy.deepcopy(raw), base_dir=base_dir or Path("."))


def _parse_body(doc: _Document, body: Dict, kind: str) -> Dict[str, Any]:
    if kind == "file":
        return {"type": "file", "path": str(_require(doc, body, "path", ["body"]))}
    parsed = {
        "type": "sphere",
        "center": _vector(doc, _require(doc, body, "center", ["body"]), ["body", "center"]),
        "radius": _number(doc, _require(doc, body, "radius", ["body"]), ["body", "radius"], nonnegative=True),
    }
    if "eps_r" in body:
        if "eps_real" in body or "sigma" in body:
            raise doc.fail("give either eps_r or eps_real/sigma, not both", ["body", "eps_r"])
        parsed["eps_r"] = _complex(doc, body["eps_r"], ["body", "eps_r"])
    else:
        parsed["eps_real"] = _number(doc, _require(doc, body, "eps_real", ["body"]), ["body", "eps_real"])
        parsed["sigma"] = _number(doc, body.get("sigma", 0.0), ["body", "sigma"], nonnegative=True)
    return parsed


def _parse_surfaces(doc: _Document, items) -> List[SurfaceSpec]:
    if not isinstance(items, list):
        raise doc.fail("surfaces must be a list", ["surfaces"])
    specs, names = [], set()
    for k, item in enumerate(items):
        path = ["surfaces", str(item.get("name", k)) if isinstance(item, dict) else str(k)]
        if not isinstance(item, dict):
            raise doc.fail("surface entries must be objects", path)
        kind = _require(doc, item, "type", path)
        if kind not in SURFACE_KEYS:
            raise doc.fail(f"unknown surface type '{kind}'", path + ["type"])
        _reject_unknown(doc, item, SURFACE_KEYS[kind], path)
        name = str(item.get("name", f"{kind}{k}"))
        if name in names:
            raise doc.fail(f"duplicate surface name '{name}'", path + ["name"])
        names.add(name)
        tag = item.get("tag", AUTO)
        if tag not in (NEAR, FAR, AUTO):
            raise doc.fail(f"tag must be near, far or auto, got '{tag}'", path + ["tag"])
        params: Dict[str, Any] = {"center": _vector(doc, _require(doc, item, "center", path), path + ["center"])}
        params["radius"] = _number(doc, _require(doc, item, "radius", path), path + ["radius"], positive=True)
        if kind == "loop":
            params["width"] = _number(doc, _require(doc, item, "width", path), path + ["width"], positive=True)
            params["patches"] = _integer(doc, _require(doc, item, "patches", path), path + ["patches"], 3)
            params["normal"] = _vector(doc, item.get("normal", [0.0, 0.0, 1.0]), path + ["normal"])
        else:
            params["length"] = _number(doc, _require(doc, item, "length", path), path + ["length"], positive=True)
            params["axial"] = _integer(doc, _require(doc, item, "axial", path), path + ["axial"])
            params["azimuthal"] = _integer(doc, _require(doc, item, "azimuthal", path), path + ["azimuthal"], 3)
            params["axis"] = _vector(doc, item.get("axis", [0.0, 0.0, 1.0]), path + ["axis"])
        specs.append(SurfaceSpec(kind, name, tag, params))
    return specs


def _parse_ports(doc: _Document, items, surfaces: List[SurfaceSpec]) -> List[PortSpec]:
    if not isinstance(items, list):
        raise doc.fail("ports must be a list", ["ports"])
    by_name = {s.name: s for s in surfaces}
    ports, seen_names, seen_patches = [], set(), set()
    for k, item in enumerate(items):
        if not isinstance(item, dict):
            raise doc.fail("port entries must be objects", ["ports", str(k)])
        name = str(item.get("name", f"port{k}"))
        path = ["ports", name]
        _reject_unknown(doc, item, PORT_KEYS, path)
        surface = str(_require(doc, item, "surface", path))
        if surface not in by_name:
            raise doc.fail(f"port '{name}' references unknown surface '{surface}'", path + ["surface"])
        patch = _integer(doc, item.get("patch", 0), path + ["patch"], minimum=0)
        direction = item.get("direction", 1)
        if direction not in (-1, 1):
            raise doc.fail(f"port '{name}' direction must be +1 or -1", path + ["direction"])
        if name in seen_names or (surface, patch) in seen_patches:
            raise doc.fail(f"duplicate port definition '{name}'", path)
        seen_names.add(name)
        seen_patches.add((surface, patch))
        amplitude = _complex(doc, item.get("amplitude", 1.0), path + ["amplitude"])
        ports.append(PortSpec(name, surface, patch, int(direction), amplitude))
    return ports


def _build_body(config: SceneConfig, frequency: Frequency) -> VoxelGrid:
    body = config.body
    if body is None:
        return VoxelGrid.vacuum(config.dims, config.spacing, config.origin)
    if body["type"] == "file":
        path = Path(body["path"])
        if not path.is_absolute():
            path = config.base_dir / path
        eps = np.load(path)
        if tuple(eps.shape) != tuple(config.dims):
            raise SceneError(f"permittivity map has shape {eps.shape}, grid dims are {config.dims}",
                             key="body.path")
        return permittivity_body(eps, config.spacing, config.origin)
    if "eps_r" in body:
        eps_r = body["eps_r"]
    else:
        eps_r = complex(complex_permittivity(body["eps_real"], body["sigma"], frequency))
    return sphere_phantom(config.dims, config.spacing, config.origin, body["center"], body["radius"], eps_r)


def _generate(spec: SurfaceSpec, tag: str, ports: List[Port]) -> SurfaceMesh:
    p = spec.params
    if spec.kind == "loop":
        return loop_mesh(p["center"], p["radius"], p["width"], p["patches"], p["normal"],
                         tag=tag, name=spec.name, ports=ports)
    return shell_mesh(p["center"], p["radius"], p["length"], p["axial"], p["azimuthal"], p["axis"],
                      tag=tag, name=spec.name, ports=ports)


def classify(distance: float, threshold: float) -> str:
    """near iff the surface comes closer to the body box than ``threshold``"""
    return NEAR if distance < threshold else FAR


def build_scene(config: SceneConfig) -> Scene:
    """Generate geometry, tag surfaces near/far and check operator preconditions"""
    frequency = Frequency(config.frequency)
    grid = _build_body(config, frequency)
    warnings: List[str] = []
    has_body = bool(grid.mask.any())
    if has_body:
        lo, hi = grid.bounding_box()
        threshold = config.far_threshold
        if threshold is None:
            threshold = FAR_THRESHOLD_FACTOR * grid.max_extent()

    meshes = {NEAR: [], FAR: []}
    tags: Dict[str, str] = {}
    for spec in config.surfaces:
        ports = [Port(p.patch, p.direction, p.name) for p in config.ports if p.surface == spec.name]
        mesh = _generate(spec, NEAR, ())
        for port in ports:
            if port.patch >= mesh.m:
                raise SceneError(f"port '{port.name}' patch {port.patch} outside surface '{spec.name}' "
                                 f"({mesh.m} patches)", key=f"ports.{port.name}.patch")
        mesh = replace(mesh, ports=tuple(ports))
        if has_body:
            distance = mesh.distance_to_box(lo, hi)
            auto_tag = classify(distance, threshold)
        else:
            distance, auto_tag = float("inf"), NEAR
        tag = auto_tag if spec.tag == AUTO else spec.tag
        if has_body and spec.tag == FAR and auto_tag == NEAR:
            message = (f"surface '{spec.name}' is tagged far but lies {distance:.4g} m from the body "
                       f"(threshold {threshold:.4g} m)")
            warnings.append(message)
            logger.warning(f"⚠️ {message}")
        tags[spec.name] = tag
        meshes[tag].append(mesh.with_tag(tag))
        logger.info(f"📊 Surface '{spec.name}': {mesh.m} patches, tagged {tag}")

    far = concatenate_meshes(meshes[FAR], FAR, "far")
    near = concatenate_meshes(meshes[NEAR], NEAR, "near")

    if not config.solver["extend"] and config.solver["near_mode"] == "pfft":
        bad = margin_violations(grid, near, config.solver["stencil"])
        if len(bad):
            raise GeometryError(f"near patch {int(bad[0])} violates the pFFT stencil margin; "
                                f"set solver.extend or enlarge the grid")
    if far.m:
        idx = grid.to_index_space(far.centroids)
        on_node = np.all(np.abs(idx - np.round(idx)) < 1e-9, axis=1)
        inside = np.all((np.round(idx) >= 0) & (np.round(idx) < np.asarray(grid.dims)), axis=1)
        if np.any(on_node & inside):
            p = int(np.flatnonzero(on_node & inside)[0])
            raise GeometryError(f"far patch {p} centroid coincides with a voxel centre")

    amplitudes = {p.name: p.amplitude for p in config.ports}
    return Scene(config, frequency, grid, far, near, tags, amplitudes, warnings)


def load_scene(path) -> SceneConfig:
    path = Path(path)
    return parse_scene(path.read_text(), base_dir=path.parent)


def apply_override(config: SceneConfig, dotted: str, value) -> SceneConfig:
    """Re-parse the scene with one value replaced; list items are addressed by name or index"""
    raw = copy.deepcopy(config.raw)
    keys = dotted.split(".")
    node = raw
    for key in keys[:-1]:
        node = _child(node, key, dotted)
    last = keys[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value
    return parse_scene_dict(raw, base_dir=config.base_dir)


def _child(node, key: str, dotted: str):
    if isinstance(node, list):
        for item in node:
            if isinstance(item, dict) and str(item.get("name")) == key:
                return item
        if key.isdigit() and int(key) < len(node):
            return node[int(key)]
    elif isinstance(node, dict):
        if key not in node:
            node[key] = {}
        return node[key]
    raise SceneError(f"cannot resolve sweep path '{dotted}'", key=dotted)
