"""Bit-exact binary snapshot format for complex transverse fields.

Layout (little-endian): 8-byte magic, uint32 version, uint32 nx, uint32 ny,
float64 dx, dy, x0, y0, wavelength, z, uint32 polarization tag, then ny*nx
row-major complex128 samples. The header dimensions must match the payload
length exactly.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .geometry import Grid2D
from .modes import FieldSlice
from .operators import POLARIZATIONS

MAGIC = b"TLFIELD\x00"
VERSION = 1
_HEADER = struct.Struct("<8sIIIddddddI")


def write_field_dump(path: str | Path, field: FieldSlice, z: float) -> None:
    """Write one field snapshot; ``read_field_dump`` restores it bit-exactly."""
    grid = field.grid
    pol_tag = POLARIZATIONS.index(field.polarization)
    header = _HEADER.pack(
        MAGIC, VERSION, grid.nx, grid.ny,
        grid.dx, grid.dy, grid.x0, grid.y0,
        field.wavelength, z, pol_tag,
    )
    payload = np.ascontiguousarray(field.E, dtype=np.complex128).astype("<c16")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def read_field_dump(path: str | Path) -> tuple[FieldSlice, float]:
    """Read a snapshot back as (field, z); rejects corrupt or truncated files."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated field dump header")
    magic, version, nx, ny, dx, dy, x0, y0, wavelength, z, pol_tag = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a field dump (bad magic {magic!r})")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported field dump version {version}")
    if pol_tag >= len(POLARIZATIONS):
        raise ValueError(f"{path}: unknown polarization tag {pol_tag}")
    expected = _HEADER.size + 16 * nx * ny
    if len(raw) != expected:
        raise ValueError(f"{path}: payload length {len(raw)} != header dims ({expected} bytes)")
    data = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size).reshape(ny, nx)
    grid = Grid2D(nx=nx, ny=ny, dx=dx, dy=dy, x0=x0, y0=y0)
    field = FieldSlice(grid=grid, E=data.astype(np.complex128), wavelength=wavelength,
                       polarization=POLARIZATIONS[pol_tag])
    return field, z
