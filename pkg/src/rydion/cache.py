"""On-disk cache for radial wavefunctions.

Record layout (little-endian): 8-byte magic, uint32 version, uint32 length of
a UTF-8 JSON state descriptor, the descriptor, uint64 point count, then the
grid and the values as float64 arrays. Files are written to a temporary name
and atomically renamed so concurrent readers never see partial records.
"""
from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"RYDWFN\x00\x01"
VERSION = 1

_enabled = True
_directory: Path | None = None


def cache_dir() -> Path:
    if _directory is not None:
        return _directory
    env = os.environ.get("RYDION_CACHE_DIR")
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "rydion"


def configure(enabled: bool | None = None, directory=None):
    """Switch the cache on/off or point it at another directory."""
    global _enabled, _directory
    if enabled is not None:
        _enabled = bool(enabled)
    if directory is not None:
        _directory = Path(directory)


def is_enabled() -> bool:
    return _enabled and os.environ.get("RYDION_NO_CACHE", "") == ""


def key_for(descriptor: dict) -> str:
    blob = json.dumps(descriptor, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:32]


def write_record(path: Path, descriptor: dict, grid: np.ndarray, values: np.ndarray):
    desc = json.dumps(descriptor, sort_keys=True).encode("utf-8")
    grid = np.ascontiguousarray(grid, dtype="<f8")
    values = np.ascontiguousarray(values, dtype="<f8")
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<II", VERSION, len(desc)))
            fh.write(desc)
            fh.write(struct.pack("<Q", grid.size))
            fh.write(grid.tobytes())
            fh.write(values.tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_record(path: Path):
    """Return (descriptor, grid, values) or None if the file is absent or unreadable."""
    try:
        raw = Path(path).read_bytes()
    except OSError:
        return None
    if raw[:8] != MAGIC:
        return None
    version, dlen = struct.unpack_from("<II", raw, 8)
    if version != VERSION:
        return None
    off = 16
    desc = json.loads(raw[off:off + dlen].decode("utf-8"))
    off += dlen
    (npts,) = struct.unpack_from("<Q", raw, off)
    off += 8
    if len(raw) != off + 16 * npts:
        return None
    grid = np.frombuffer(raw, "<f8", npts, off).copy()
    values = np.frombuffer(raw, "<f8", npts, off + 8 * npts).copy()
    return desc, grid, values


def load(descriptor: dict):
    if not is_enabled():
        return None
    rec = read_record(cache_dir() / f"{key_for(descriptor)}.wfn")
    if rec is None or rec[0] != descriptor:
        return None
    return rec[1], rec[2]


def store(descriptor: dict, grid, values):
    if not is_enabled():
        return
    try:
        write_record(cache_dir() / f"{key_for(descriptor)}.wfn", descriptor, grid, values)
    except OSError:
        pass  # a read-only cache location only costs recomputation
