"""Versioned on-disk cache for expensive grids.

Entries are keyed by a content hash of the physics-relevant configuration;
any change of a physics key produces a new entry.  The file format is a
magic/version header, a JSON metadata block, named little-endian float64
payload arrays, and a trailing SHA-256 checksum over everything before it.
Corrupted or version-mismatched entries are treated as absent so callers
simply recompute.  Writes go through a temporary file and an atomic rename.

The format version must be bumped whenever any physics-affecting change is
made to the producers, otherwise stale grids would be reused.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
import time
from pathlib import Path

import numpy as np

__all__ = ["cache_dir", "config_key", "save_grids", "load_grids", "collect_garbage"]

_MAGIC = b"TPHC"
_VERSION = 1

_ENV_VAR = "TRIPHOTON_CACHE_DIR"


def cache_dir(override: str | os.PathLike | None = None) -> Path:
    """Cache directory: explicit override, environment, or user cache."""
    if override is not None:
        path = Path(override)
    elif _ENV_VAR in os.environ:
        path = Path(os.environ[_ENV_VAR])
    else:
        path = Path.home() / ".cache" / "triphoton"
    path.mkdir(parents=True, exist_ok=True)
    return path


def config_key(config: dict) -> str:
    """Content hash of a configuration dictionary (order independent)."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _entry_path(directory: Path, key: str) -> Path:
    return directory / f"{key}.tpc"


def save_grids(key: str, meta: dict, arrays: dict[str, np.ndarray],
               directory: str | os.PathLike | None = None) -> Path:
    """Write named arrays with metadata under the given key, atomically."""
    d = cache_dir(directory)
    blob = bytearray()
    blob += _MAGIC
    blob += struct.pack("<I", _VERSION)
    meta_bytes = json.dumps(meta, sort_keys=True, default=str).encode("utf-8")
    blob += struct.pack("<I", len(meta_bytes))
    blob += meta_bytes
    blob += struct.pack("<I", len(arrays))
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        name_b = name.encode("utf-8")
        dtype = "c16" if np.iscomplexobj(arr) else "f8"
        arr = arr.astype(np.complex128 if dtype == "c16" else np.float64)
        blob += struct.pack("<I", len(name_b))
        blob += name_b
        blob += dtype.encode("ascii").ljust(4, b"\0")
        blob += struct.pack("<I", arr.ndim)
        for s in arr.shape:
            blob += struct.pack("<Q", s)
        blob += arr.tobytes(order="C")
    blob += hashlib.sha256(bytes(blob)).digest()

    target = _entry_path(d, key)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(bytes(blob))
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return target


def load_grids(key: str, directory: str | os.PathLike | None = None):
    """Load a cache entry; returns (meta, arrays) or None if absent/corrupt."""
    path = _entry_path(cache_dir(directory), key)
    if not path.exists():
        return None
    raw = path.read_bytes()
    if len(raw) < 44 or raw[:4] != _MAGIC:
        return None
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        return None
    off = 4
    (version,) = struct.unpack_from("<I", body, off)
    off += 4
    if version != _VERSION:
        return None
    (mlen,) = struct.unpack_from("<I", body, off)
    off += 4
    meta = json.loads(body[off : off + mlen].decode("utf-8"))
    off += mlen
    (narr,) = struct.unpack_from("<I", body, off)
    off += 4
    arrays = {}
    try:
        for _ in range(narr):
            (nlen,) = struct.unpack_from("<I", body, off)
            off += 4
            name = body[off : off + nlen].decode("utf-8")
            off += nlen
            dtype = body[off : off + 4].rstrip(b"\0").decode("ascii")
            off += 4
            (ndim,) = struct.unpack_from("<I", body, off)
            off += 4
            shape = struct.unpack_from(f"<{ndim}Q", body, off)
            off += 8 * ndim
            np_dtype = np.complex128 if dtype == "c16" else np.float64
            nbytes = int(np.prod(shape)) * np.dtype(np_dtype).itemsize
            arrays[name] = np.frombuffer(
                body[off : off + nbytes], dtype=np_dtype
            ).reshape(shape).copy()
            off += nbytes
    except (struct.error, ValueError):
        return None
    return meta, arrays


def collect_garbage(max_age_days: float | None = None,
                    directory: str | os.PathLike | None = None) -> int:
    """Delete cache entries, optionally only those older than max_age_days."""
    d = cache_dir(directory)
    now = time.time()
    removed = 0
    for path in d.glob("*.tpc"):
        if max_age_days is None or now - path.stat().st_mtime > max_age_days * 86400:
            path.unlink()
            removed += 1
    return removed
