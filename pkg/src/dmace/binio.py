"""Little-endian binary containers shared by datasets, dictionaries and checkpoints.

A file is ``magic (4 bytes) | version u32 | header_len u32 | header JSON`` followed
by a payload. Tensors are written as::

    name_len u32 | name utf-8 | kind u8 (0 real, 1 complex) | ndim u32 | shape u64 * ndim | data

with ``float64`` data; complex data is interleaved ``re, im``.
"""

from __future__ import annotations

import json
import struct
from typing import BinaryIO

import numpy as np

from dmace.errors import PersistenceError

VERSION = 1
_F8 = np.dtype("<f8")


def write_header(f: BinaryIO, magic: bytes, header: dict) -> None:
    blob = json.dumps(header, sort_keys=True).encode()
    f.write(magic)
    f.write(struct.pack("<II", VERSION, len(blob)))
    f.write(blob)


def read_header(f: BinaryIO, magic: bytes) -> dict:
    got = f.read(4)
    if got != magic:
        raise PersistenceError(f"bad magic {got!r}, expected {magic!r}")
    raw = f.read(8)
    if len(raw) != 8:
        raise PersistenceError("truncated header")
    version, n = struct.unpack("<II", raw)
    if version != VERSION:
        raise PersistenceError(f"unsupported version {version}")
    return json.loads(f.read(n).decode())


def write_array(f: BinaryIO, a) -> None:
    a = np.asarray(a)
    if np.iscomplexobj(a):
        flat = np.empty(a.size * 2, dtype=_F8)
        flat[0::2] = a.real.ravel()
        flat[1::2] = a.imag.ravel()
    else:
        flat = a.astype(_F8).ravel()
    f.write(flat.tobytes())


def read_array(f: BinaryIO, shape, complex_: bool) -> np.ndarray:
    count = int(np.prod(shape, dtype=np.int64)) * (2 if complex_ else 1)
    raw = f.read(count * 8)
    if len(raw) != count * 8:
        raise PersistenceError("truncated payload")
    flat = np.frombuffer(raw, dtype=_F8).astype(np.float64)
    if complex_:
        return (flat[0::2] + 1j * flat[1::2]).reshape(shape)
    return flat.reshape(shape)


def write_tensor(f: BinaryIO, name: str, a) -> None:
    a = np.asarray(a)
    nb = name.encode()
    f.write(struct.pack("<I", len(nb)))
    f.write(nb)
    f.write(struct.pack("<BI", int(np.iscomplexobj(a)), a.ndim))
    f.write(struct.pack(f"<{a.ndim}Q", *a.shape))
    write_array(f, a)


def read_tensor(f: BinaryIO) -> tuple[str, np.ndarray]:
    raw = f.read(4)
    if len(raw) != 4:
        raise PersistenceError("truncated tensor record")
    (n,) = struct.unpack("<I", raw)
    name = f.read(n).decode()
    kind, ndim = struct.unpack("<BI", f.read(5))
    shape = struct.unpack(f"<{ndim}Q", f.read(8 * ndim))
    return name, read_array(f, shape, bool(kind))


def save_tensors(path, magic: bytes, header: dict, tensors: dict) -> None:
    try:
        with open(path, "wb") as f:
            write_header(f, magic, header)
            f.write(struct.pack("<I", len(tensors)))
            for name, a in tensors.items():
                write_tensor(f, name, a)
    except OSError as exc:
        raise PersistenceError(str(exc)) from exc


def load_tensors(path, magic: bytes) -> tuple[dict, dict]:
    try:
        with open(path, "rb") as f:
            header = read_header(f, magic)
            (count,) = struct.unpack("<I", f.read(4))
            tensors = dict(read_tensor(f) for _ in range(count))
    except OSError as exc:
        raise PersistenceError(str(exc)) from exc
    return header, tensors
