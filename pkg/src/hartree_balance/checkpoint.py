"""Binary field checkpoints and JSON sidecars.

Layout (little-endian): a fixed header

    magic "HBAL" | version u32 | grid kind u8 | N u8 | n-or-M u32 |
    L-or-R_max f64 | gamma1 f64 | gamma2 f64

followed, for version 2 only, by the radial face stretch as one f64, and
then by the samples as (re, im) f64 pairs in layout order. Version 1 files
carry tensor grids or uniform radial grids; graded radial grids use
version 2. Single-kernel (Choquard) fields store gamma2 = 0.
"""

from __future__ import annotations

import json
import math
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError
from .reporting import write_json
from .spectral_core import Field, GridSpec, RadialGridSpec

MAGIC = b"HBAL"
HEADER = struct.Struct("<4sIBBIddd")
STRETCH = struct.Struct("<d")
VERSION_PLAIN = 1
VERSION_GRADED = 2
KIND_CODES = {"tensor": 0, "radial": 1}


@dataclass(frozen=True)
class Checkpoint:
    """A field together with the exponents it was computed for."""

    field: Field
    gamma1: float
    gamma2: float
    version: int


def encode(field: Field, gamma1: float, gamma2: float) -> bytes:
    grid = field.grid
    if grid.kind == "tensor":
        version, count, extent, extra = VERSION_PLAIN, grid.n, grid.L, b""
    else:
        count, extent = grid.M, grid.R_max
        if grid.stretch == 0.0:
            version, extra = VERSION_PLAIN, b""
        else:
            version, extra = VERSION_GRADED, STRETCH.pack(grid.stretch)
    header = HEADER.pack(MAGIC, version, KIND_CODES[grid.kind], grid.N, count, extent, float(gamma1), float(gamma2))
    samples = np.empty(grid.size * 2, dtype="<f8")
    flat = np.asarray(field.values).reshape(-1)
    samples[0::2] = flat.real
    samples[1::2] = flat.imag if np.iscomplexobj(flat) else 0.0
    return header + extra + samples.tobytes()


def decode(data: bytes) -> Checkpoint:
    if len(data) < HEADER.size:
        raise FormatError(f"checkpoint truncated: {len(data)} bytes, header needs {HEADER.size}")
    magic, version, kind, N, count, extent, g1, g2 = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version not in (VERSION_PLAIN, VERSION_GRADED):
        raise FormatError(f"unsupported checkpoint version {version}")
    offset = HEADER.size
    try:
        if kind == KIND_CODES["tensor"]:
            if version != VERSION_PLAIN:
                raise FormatError("tensor checkpoints must use version 1")
            grid = GridSpec(N, extent, count)
        elif kind == KIND_CODES["radial"]:
            stretch = 0.0
            if version == VERSION_GRADED:
                if len(data) < offset + STRETCH.size:
                    raise FormatError("checkpoint truncated inside the radial stretch field")
                (stretch,) = STRETCH.unpack_from(data, offset)
                offset += STRETCH.size
            grid = RadialGridSpec(N, count, extent, stretch)
        else:
            raise FormatError(f"unknown grid kind code {kind}")
    except ConfigError as exc:
        raise FormatError(f"checkpoint header describes an invalid grid: {exc}") from exc
    expected = offset + 16 * grid.size
    if len(data) != expected:
        raise FormatError(f"checkpoint payload has {len(data)} bytes, header implies {expected}")
    samples = np.frombuffer(data, dtype="<f8", offset=offset)
    values = (samples[0::2] + 1j * samples[1::2]).reshape(grid.shape)
    for name, g in (("gamma1", g1), ("gamma2", g2)):
        if not math.isfinite(g):
            raise FormatError(f"non-finite {name} in checkpoint header")
    return Checkpoint(Field(grid, values), g1, g2, version)


def write_checkpoint(path: str | os.PathLike, field: Field, gamma1: float, gamma2: float) -> Path:
    path = Path(path)
    path.write_bytes(encode(field, gamma1, gamma2))
    return path


def read_checkpoint(path: str | os.PathLike) -> Checkpoint:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read checkpoint {path}: {exc}") from exc
    return decode(data)


def sidecar_path(path: str | os.PathLike) -> Path:
    return Path(path).with_suffix(".json")


def write_sidecar(path: str | os.PathLike, record: dict) -> Path:
    return write_json(path, record)


def read_sidecar(path: str | os.PathLike) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read sidecar {path}: {exc}") from exc


def save_ground_state(path: str | os.PathLike, gs) -> tuple[Path, Path]:
    """Write ``gs.field`` as a checkpoint plus its JSON sidecar."""
    path = Path(path)
    g1 = gs.kernels.gamma1 if hasattr(gs.kernels, "gamma1") else gs.kernels.gamma
    g2 = gs.kernels.gamma2 if hasattr(gs.kernels, "gamma2") else 0.0
    write_checkpoint(path, gs.field, g1, g2)
    side = write_sidecar(sidecar_path(path), gs.sidecar())
    return path, side

