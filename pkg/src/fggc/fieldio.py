"""Binary field files.

Layout (little-endian)::

    b"FGCF"            magic
    u32                version
    u32                dim
    u32 * dim          grid counts
    f64                epsilon
    f64 * dim          domain lower bounds
    f64 * dim          domain upper bounds
    f64 * 2 * prod(n)  row-major samples, interleaved real/imag
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import MeshSpec

MAGIC = b"FGCF"
VERSION = 1


class FieldFormatError(ValueError):
    pass


@dataclass(frozen=True)
class FieldHeader:
    dim: int
    counts: tuple[int, ...]
    epsilon: float
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    @classmethod
    def from_mesh(cls, mesh: MeshSpec) -> "FieldHeader":
        return cls(mesh.dim, tuple(mesh.shape), mesh.epsilon, tuple(mesh.domain_lo), tuple(mesh.domain_hi))


def write_field(path, u, mesh_or_header) -> None:
    header = mesh_or_header if isinstance(mesh_or_header, FieldHeader) else FieldHeader.from_mesh(mesh_or_header)
    u = np.asarray(u, dtype="<c16")
    if u.shape != header.counts:
        raise FieldFormatError(f"field shape {u.shape} does not match header counts {header.counts}")
    d = header.dim
    head = MAGIC + struct.pack(f"<II{d}Id{d}d{d}d", VERSION, d, *header.counts, header.epsilon, *header.lo, *header.hi)
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(u).tobytes())


def read_field(path) -> tuple[np.ndarray, FieldHeader]:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise FieldFormatError(f"{path}: bad magic {data[:4]!r}")
    version, d = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise FieldFormatError(f"{path}: unsupported version {version}")
    if d not in (1, 2, 3):
        raise FieldFormatError(f"{path}: bad dimension {d}")
    fmt = f"<{d}Id{d}d{d}d"
    vals = struct.unpack_from(fmt, data, 12)
    counts = tuple(vals[:d])
    eps = vals[d]
    lo, hi = tuple(vals[d + 1 : 2 * d + 1]), tuple(vals[2 * d + 1 :])
    offset = 12 + struct.calcsize(fmt)
    expected = 16 * int(np.prod(counts))
    if len(data) - offset != expected:
        raise FieldFormatError(f"{path}: payload is {len(data) - offset} bytes, expected {expected}")
    u = np.frombuffer(data, dtype="<c16", offset=offset).reshape(counts).astype(np.complex128)
    return u, FieldHeader(d, counts, eps, lo, hi)
