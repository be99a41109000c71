"""
Run outputs
Self-describing binary current files, CSV exports and key=value reports
"""
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from VSIE.errors import ArgumentError
from VSIE.solvers.report import SolveReport

logger = logging.getLogger(__name__)

MAGIC = b"VSIECUR1"
PAYLOAD_DTYPE = "<c8"
LAYOUT = ("far", "near", "body")


@dataclass
class RunOutput:
    j_f: np.ndarray
    j_n: np.ndarray
    j_b: np.ndarray
    report: SolveReport
    dims: Tuple[int, int, int]
    scene: Dict = field(default_factory=dict)


def write_currents(path, j_f: np.ndarray, j_n: np.ndarray, j_b: np.ndarray,
                   dims: Tuple[int, int, int], scene: Optional[Dict] = None) -> Path:
    """Magic, little-endian header length, JSON header, complex64 payload (far | near | body)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blocks = [np.asarray(v).astype(PAYLOAD_DTYPE) for v in (j_f, j_n, j_b)]
    header = {
        "dims": [int(n) for n in dims],
        "layout": list(LAYOUT),
        "counts": {name: int(len(b)) for name, b in zip(LAYOUT, blocks)},
        "body_layout": "component-major, column-major voxels",
        "dtype": "complex64",
        "endianness": "little",
        "units": "grid-normalised",
        "scene": scene or {},
    }
    encoded = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(encoded)))
        fh.write(encoded)
        for block in blocks:
            fh.write(block.tobytes())
    logger.info(f"✅ Currents written to {path} ({sum(len(b) for b in blocks):,} values)")
    return path


def read_currents(path) -> Tuple[np.ndarray, np.ndarray, np.ndarray, Dict]:
    data = Path(path).read_bytes()
    if data[:len(MAGIC)] != MAGIC:
        raise ArgumentError(f"{path} is not a currents file")
    offset = len(MAGIC)
    (length,) = struct.unpack("<I", data[offset:offset + 4])
    offset += 4
    header = json.loads(data[offset:offset + length].decode("utf-8"))
    offset += length
    payload = np.frombuffer(data, dtype=PAYLOAD_DTYPE, offset=offset)
    counts = [header["counts"][name] for name in LAYOUT]
    if sum(counts) != payload.size:
        raise ArgumentError(f"{path}: header counts {counts} do not match payload of {payload.size} values")
    j_f, j_n, j_b = np.split(payload.copy(), np.cumsum(counts)[:-1])
    return j_f, j_n, j_b, header


def currents_frame(j_f: np.ndarray, j_n: np.ndarray, j_b: np.ndarray,
                   dims: Tuple[int, int, int]) -> pd.DataFrame:
    """Long-format table: one row per unknown"""
    n_v = int(np.prod(dims))
    i1, i2, i3 = np.unravel_index(np.arange(n_v), dims, order="F")
    frames = [
        pd.DataFrame({"block": "far", "index": np.arange(len(j_f)), "component": "t"}),
        pd.DataFrame({"block": "near", "index": np.arange(len(j_n)), "component": "t"}),
        pd.DataFrame({
            "block": "body",
            "index": np.tile(np.arange(n_v), 3),
            "component": np.repeat(["x", "y", "z"], n_v),
            "i1": np.tile(i1, 3), "i2": np.tile(i2, 3), "i3": np.tile(i3, 3),
        }),
    ]
    df = pd.concat(frames, ignore_index=True)
    values = np.concatenate([j_f, j_n, j_b])
    df["real"] = values.real
    df["imag"] = values.imag
    df["magnitude"] = np.abs(values)
    return df


def write_currents_csv(path, j_f, j_n, j_b, dims) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    currents_frame(np.asarray(j_f), np.asarray(j_n), np.asarray(j_b), dims).to_csv(path, index=False)
    logger.info(f"✅ Currents CSV written to {path}")
    return path


def write_report(path, report: SolveReport, include_wall_time: bool = True) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{key}={value}" for key, value in report.fields(include_wall_time).items()]
    path.write_text("\n".join(lines) + "\n")
    logger.info(f"✅ Report written to {path}")
    return path


def read_report(path) -> Dict[str, str]:
    values = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            values[key] = value
    return values
