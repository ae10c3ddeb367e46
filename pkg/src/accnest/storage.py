"""Flat binary matrix files used for problem and reference caches.

Layout: a 16-byte little-endian header ``magic (8 bytes) | rows (u32) |
cols (u32)`` followed by ``rows * cols`` float64 values in row-major order.
Vectors are stored as ``n x 1`` matrices.
"""

import os
import struct
import tempfile

import numpy as np

MAGIC = b"ACCNEST1"
_HEADER = struct.Struct("<8sII")


def write_matrix(path, mat):
    """Write `mat` atomically (temp file in the same directory, then rename)."""
    mat = np.asarray(mat, dtype="<f8")
    if mat.ndim == 1:
        mat = mat.reshape(-1, 1)
    if mat.ndim != 2:
        raise ValueError("only 1-D or 2-D arrays can be stored")
    rows, cols = mat.shape
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".bin")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, rows, cols))
            fh.write(np.ascontiguousarray(mat).tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_matrix(path):
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, rows, cols = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} values, found {data.size}")
    return data.reshape(rows, cols).astype(float)


def read_vector(path):
    return read_matrix(path).reshape(-1)
