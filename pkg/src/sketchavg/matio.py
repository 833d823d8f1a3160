"""Matrix and vector file formats.

Two formats are supported:

* CSV: one matrix row per line, ``.`` decimal separator, no header.
* DSKM binary: the 4 magic bytes ``DSKM``, then ``rows`` and ``cols`` as
  unsigned 64-bit little-endian integers, then ``rows * cols`` little-endian
  IEEE-754 doubles in row-major order.

Vectors are stored as single-column matrices.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ShapeMismatch
from .linalg import as_matrix

MAGIC = b"DSKM"
_HEADER = struct.Struct("<4sQQ")


def is_dskm(path) -> bool:
    with open(path, "rb") as fh:
        return fh.read(4) == MAGIC


def write_dskm(path, M) -> None:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim == 1:
        M = M.reshape(-1, 1)
    M = as_matrix(M)
    rows, cols = M.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, rows, cols))
        fh.write(np.ascontiguousarray(M, dtype="<f8").tobytes())


def read_dskm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ShapeMismatch(f"{path}: truncated DSKM header")
    magic, rows, cols = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ShapeMismatch(f"{path}: bad magic {magic!r}")
    body = data[_HEADER.size:]
    if len(body) != rows * cols * 8:
        raise ShapeMismatch(f"{path}: expected {rows * cols} doubles, found {len(body) // 8}")
    M = np.frombuffer(body, dtype="<f8").astype(np.float64).reshape(rows, cols)
    return as_matrix(M, name=str(path))


def write_csv(path, M) -> None:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim == 1:
        M = M.reshape(-1, 1)
    # %.17g round-trips every double exactly
    np.savetxt(path, M, delimiter=",", fmt="%.17g")


def read_csv(path) -> np.ndarray:
    M = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    return as_matrix(M, name=str(path))


def read_matrix(path) -> np.ndarray:
    """Load a matrix, detecting the DSKM magic bytes and falling back to CSV."""
    return read_dskm(path) if is_dskm(path) else read_csv(path)


def read_vector(path) -> np.ndarray:
    M = read_matrix(path)
    if M.shape[1] != 1 and M.shape[0] != 1:
        raise ShapeMismatch(f"{path}: expected a single row or column, got {M.shape}")
    return M.reshape(-1)


def write_matrix(path, M) -> None:
    """Write ``M`` as DSKM when the file name ends in ``.dskm``, else as CSV."""
    if str(path).lower().endswith(".dskm"):
        write_dskm(path, M)
    else:
        write_csv(path, M)
