"""Field files, run manifests and grayscale heatmaps.

Field file layout (all little-endian)::

    offset  size  content
    0       4     magic b"CYFD"
    4       2     version (1)
    6       2     n
    8       4     m
    12      2     form degree
    14      2     component count
    16      4     CRC32 of the payload
    20      12    zero padding
    32      ...   float64 values, row-major points, components innermost
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
import zlib
from math import comb
from pathlib import Path

import numpy as np

from .errors import FieldFileError, SliceRequired

MAGIC = b"CYFD"
VERSION = 1
_HEADER = struct.Struct("<4sHHIHHI12x")
HEADER_SIZE = _HEADER.size  # 32


def _atomic_write(path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_field(values, n: int, m: int, degree: int = 0) -> bytes:
    values = np.asarray(values, dtype="<f8")
    d = 2 * n
    grid_shape = (m,) * d
    if values.shape[:d] != grid_shape:
        raise FieldFileError(f"field shape {values.shape} does not match n={n}, m={m}")
    extra = values.shape[d:]
    ncomp = int(np.prod(extra)) if extra else 1
    if degree and ncomp != comb(d, degree):
        raise FieldFileError(f"{ncomp} components for a {degree}-form in dimension {d}")
    payload = np.ascontiguousarray(values).tobytes()
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    return _HEADER.pack(MAGIC, VERSION, n, m, degree, ncomp, crc) + payload


def decode_field(data: bytes):
    """Returns ``(values, n, m, degree)``."""
    if len(data) < HEADER_SIZE:
        raise FieldFileError("field file shorter than its header")
    magic, version, n, m, degree, ncomp, crc = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FieldFileError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FieldFileError(f"unsupported field file version {version}")
    if n < 1 or m < 1 or ncomp < 1:
        raise FieldFileError("corrupt header")
    d = 2 * n
    count = m**d * ncomp
    if len(data) != HEADER_SIZE + 8 * count:
        raise FieldFileError(f"payload size {len(data) - HEADER_SIZE} != {8 * count} bytes")
    payload = data[HEADER_SIZE:]
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        raise FieldFileError("payload checksum mismatch")
    vals = np.frombuffer(payload, dtype="<f8").astype(float)
    shape = (m,) * d + ((ncomp,) if ncomp > 1 or degree else ())
    return vals.reshape(shape), n, m, degree


def write_field(path, values, n: int, m: int, degree: int = 0):
    _atomic_write(path, encode_field(values, n, m, degree))


def read_field(path):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise FieldFileError(f"cannot read {path}: {exc.strerror}") from exc
    return decode_field(data)


# -------------------------------------------------------------------- manifest


def _canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True).encode()


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path, hashed: dict, unhashed: dict = None):
    """Atomic JSON manifest; ``hash`` covers the ``hashed`` section only."""
    doc = {
        "hashed": hashed,
        "hash": hashlib.sha256(_canonical(hashed)).hexdigest(),
        "unhashed": unhashed or {},
    }
    _atomic_write(path, (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode())
    return doc


def read_manifest(path):
    doc = json.loads(Path(path).read_text())
    if hashlib.sha256(_canonical(doc["hashed"])).hexdigest() != doc["hash"]:
        raise FieldFileError("manifest hash does not match its hashed section")
    return doc


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(_fmt(v) for v in r))
    _atomic_write(path, ("\n".join(lines) + "\n").encode())


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


# --------------------------------------------------------------------- heatmap


def heatmap_bytes(field, axes=(0, 1), fixed=None) -> bytes:
    """Binary PGM of a 2D slice: rows follow ``axes[0]``, columns ``axes[1]``.

    Values map linearly with min to 0 and max to 255; a constant slice
    is drawn as uniform 128.
    """
    u = np.asarray(field, float)
    if u.ndim > 2:
        if fixed is None:
            raise SliceRequired(f"{u.ndim}-dimensional field needs a slice")
        others = [a for a in range(u.ndim) if a not in axes]
        if len(fixed) != len(others):
            raise SliceRequired(f"need {len(others)} fixed indices, got {len(fixed)}")
        index = [slice(None)] * u.ndim
        for a, i in zip(others, fixed):
            index[a] = int(i) % u.shape[a]
        u = u[tuple(index)]
        if axes[0] > axes[1]:
            u = u.T
    elif u.ndim != 2:
        raise SliceRequired("heatmaps need at least two grid axes")
    lo, hi = float(u.min()), float(u.max())
    if hi - lo <= 0:
        img = np.full(u.shape, 128, dtype=np.uint8)
    else:
        img = np.rint((u - lo) / (hi - lo) * 255.0).astype(np.uint8)
    h, w = img.shape
    return f"P5\n{w} {h}\n255\n".encode() + img.tobytes()


def emit_heatmap(field, path, axes=(0, 1), fixed=None):
    _atomic_write(path, heatmap_bytes(field, axes, fixed))
