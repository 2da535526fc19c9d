"""Single-file binary container: magic header, JSON metadata, raw array blocks.

Byte layout is fully deterministic (no timestamps, sorted JSON keys), so
identical content always serializes to identical bytes. Used for trained
model files.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import ParseError


def pack_container(magic: bytes, header: dict, arrays: dict[str, np.ndarray]) -> bytes:
    if len(magic) != 8:
        raise ValueError("magic must be exactly 8 bytes")
    manifest = []
    blocks = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        manifest.append({"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape)})
        blocks.append(arr.tobytes())
    full_header = dict(header)
    full_header["arrays"] = manifest
    header_bytes = json.dumps(full_header, sort_keys=True, separators=(",", ":")).encode()
    return magic + struct.pack("<Q", len(header_bytes)) + header_bytes + b"".join(blocks)


def unpack_container(data: bytes, magic: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    if len(data) < 16 or data[:8] != magic:
        raise ParseError(f"bad container magic, expected {magic!r}")
    (header_len,) = struct.unpack("<Q", data[8:16])
    header = json.loads(data[16:16 + header_len].decode())
    arrays: dict[str, np.ndarray] = {}
    offset = 16 + header_len
    for entry in header.pop("arrays", []):
        dtype = np.dtype(entry["dtype"])
        shape = tuple(entry["shape"])
        nbytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64)) if shape else dtype.itemsize
        raw = data[offset:offset + nbytes]
        if len(raw) != nbytes:
            raise ParseError(f"container truncated while reading array {entry['name']!r}")
        arrays[entry["name"]] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
        offset += nbytes
    return header, arrays


def write_container(path: str | Path, magic: bytes, header: dict, arrays: dict[str, np.ndarray]) -> str:
    """Write and return the sha256 fingerprint of the file bytes."""
    data = pack_container(magic, header, arrays)
    Path(path).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def read_container(path: str | Path, magic: bytes) -> tuple[dict, dict[str, np.ndarray], str]:
    data = Path(path).read_bytes()
    header, arrays = unpack_container(data, magic)
    return header, arrays, hashlib.sha256(data).hexdigest()
