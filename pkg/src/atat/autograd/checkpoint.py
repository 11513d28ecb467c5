"""Binary checkpoint format for named float32 tensors.

    b"ATAT" | u32 version | u32 entry count
    per entry: u32 name length | UTF-8 name | u32 rank | rank * u32 dims | f32 payload

All integers and floats are little endian.
"""

from __future__ import annotations

import struct
from collections import OrderedDict
from pathlib import Path

import numpy as np

from ..errors import ConfigError

MAGIC = b"ATAT"
VERSION = 1


def encode(state: dict) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(state))]
    for name, arr in state.items():
        arr = np.asarray(arr, dtype="<f4")  # not ascontiguousarray: it promotes 0-d to 1-d
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def decode(blob: bytes, source: str = "<bytes>") -> "OrderedDict[str, np.ndarray]":
    if blob[:4] != MAGIC:
        raise ConfigError(f"{source}: not an ATAT checkpoint (bad magic {blob[:4]!r})")
    try:
        version, count = struct.unpack_from("<II", blob, 4)
        if version != VERSION:
            raise ConfigError(f"{source}: unsupported checkpoint version {version}")
        pos = 12
        out: "OrderedDict[str, np.ndarray]" = OrderedDict()
        for _ in range(count):
            (n,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            name = blob[pos:pos + n].decode("utf-8")
            pos += n
            (rank,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            dims = struct.unpack_from(f"<{rank}I", blob, pos)
            pos += 4 * rank
            size = int(np.prod(dims)) if rank else 1
            nbytes = 4 * size
            if pos + nbytes > len(blob):
                raise ConfigError(f"{source}: truncated payload for {name!r}")
            out[name] = np.frombuffer(blob, dtype="<f4", count=size, offset=pos).reshape(dims).copy()
            pos += nbytes
    except struct.error as exc:
        raise ConfigError(f"{source}: truncated checkpoint ({exc})") from exc
    if pos != len(blob):
        raise ConfigError(f"{source}: {len(blob) - pos} trailing bytes")
    return out


def save_checkpoint(path, state: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode(state))
    return path


def load_checkpoint(path) -> "OrderedDict[str, np.ndarray]":
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"checkpoint not found: {path}")
    return decode(path.read_bytes(), str(path))
