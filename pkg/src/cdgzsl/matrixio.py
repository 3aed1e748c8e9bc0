"""Binary matrix serialization: the MTX1 container.

Layout: 4 magic bytes b"MTX1", u32 little-endian row count, u32 little-endian
column count, then rows*cols IEEE-754 f32 values, little-endian, row-major.
All on-disk matrices (bundles, checkpoints, pipeline artifacts) use it.
"""

import struct
from pathlib import Path

import numpy as np

MAGIC = b"MTX1"
_HEADER = struct.Struct("<4sII")


class MatrixFormatError(ValueError):
    """Raised when a matrix file or stream does not follow the MTX1 layout."""


def write_matrix_stream(fp, matrix):
    """Append one 2-D matrix to an open binary stream as an MTX1 block."""
    arr = np.ascontiguousarray(matrix, dtype="<f4")
    if arr.ndim != 2:
        raise MatrixFormatError(f"expected a 2-D matrix, got shape {arr.shape}")
    fp.write(_HEADER.pack(MAGIC, arr.shape[0], arr.shape[1]))
    fp.write(arr.tobytes(order="C"))


def read_matrix_stream(fp, name="<stream>"):
    """Read one MTX1 block from an open binary stream, returning float32 [rows, cols]."""
    header = fp.read(_HEADER.size)
    if len(header) != _HEADER.size:
        raise MatrixFormatError(f"{name}: truncated header ({len(header)} bytes)")
    magic, rows, cols = _HEADER.unpack(header)
    if magic != MAGIC:
        raise MatrixFormatError(f"{name}: bad magic {magic!r}, expected {MAGIC!r}")
    payload = fp.read(4 * rows * cols)
    if len(payload) != 4 * rows * cols:
        raise MatrixFormatError(
            f"{name}: truncated payload, expected {4 * rows * cols} bytes, got {len(payload)}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(rows, cols).copy()


def write_matrix(path, matrix):
    """Write a single matrix to `path` as one MTX1 block."""
    with open(path, "wb") as fp:
        write_matrix_stream(fp, matrix)


def read_matrix(path):
    """Read a single-matrix MTX1 file; trailing bytes are rejected."""
    path = Path(path)
    with open(path, "rb") as fp:
        mat = read_matrix_stream(fp, name=path.name)
        if fp.read(1):
            raise MatrixFormatError(f"{path.name}: trailing bytes after matrix payload")
    return mat
