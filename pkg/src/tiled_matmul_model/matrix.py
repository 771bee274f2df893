"""
Dense matrix containers, seeded generation, the TMM1 file format and the GEMM oracle
"""

import logging
import math
import struct
from os import PathLike
from typing import ClassVar

import numpy as np
import numpy.typing as npt

from tiled_matmul_model.errors import (
    BadMagicError,
    MatrixFormatError,
    ShapeError,
    TruncatedPayloadError,
    UnknownDtypeError,
)
from tiled_matmul_model.units import NamedEnum

log = logging.getLogger(__name__)

MAGIC = b"TMM1"
# magic, dtype code, 3 reserved bytes (zero), rows, cols
_HEADER = struct.Struct("<4sB3sII")
_RESERVED = bytes(3)

_FNV64_OFFSET = 0xCBF29CE484222325
_FNV64_PRIME = 0x100000001B3
_FNV64_MASK = 0xFFFFFFFFFFFFFFFF


class MatrixDtype(NamedEnum):
    """Element type of a matrix; the value is its TMM1 dtype code."""

    int8 = 0
    int32 = 1
    f32 = 2

    @property
    def numpy_dtype(self) -> np.dtype:
        return np.dtype(_NUMPY_DTYPES[self])

    @property
    def itemsize(self) -> int:
        return self.numpy_dtype.itemsize


# Little-endian storage types, matching the file format.
_NUMPY_DTYPES = {
    MatrixDtype.int8: "<i1",
    MatrixDtype.int32: "<i4",
    MatrixDtype.f32: "<f4",
}


class Matrix:
    """
    Immutable dense row-major matrix.

    Subclasses fix the element type. ``data`` is a read-only 2-D numpy array;
    it works unmodified with numpy but cannot be written through.

    Parameters
    ----------
    data : array-like
        Nested sequence or array of shape ``(rows, cols)``. Values must be
        representable in the subclass dtype; out-of-range, fractional and
        non-finite values are rejected, never wrapped or truncated.
    """

    dtype: ClassVar[MatrixDtype]

    def __init__(self, data: npt.ArrayLike) -> None:
        raw = np.asarray(data)
        if raw.ndim != 2:
            raise ShapeError(f"{type(self).__name__} needs 2-D data, got shape {raw.shape}")
        rows, cols = raw.shape
        if rows < 1 or cols < 1:
            raise ShapeError(f"{type(self).__name__} shape {raw.shape} must be at least 1x1")
        self._check_values(raw)
        arr = np.array(raw, dtype=self.dtype.numpy_dtype, order="C")
        arr.setflags(write=False)
        self._data = arr

    def _check_values(self, raw: np.ndarray) -> None:
        if self.dtype is MatrixDtype.f32:
            return
        if raw.dtype.kind not in "iub":
            values = np.asarray(raw, dtype=np.float64)
            if not np.all(np.isfinite(values)) or not np.array_equal(values, np.trunc(values)):
                raise ValueError(f"{type(self).__name__} elements must be finite integers")
        info = np.iinfo(self.dtype.numpy_dtype)
        if raw.size and (raw.min() < info.min or raw.max() > info.max):
            raise ValueError(
                f"{type(self).__name__} values must lie in [{info.min}, {info.max}], "
                f"got range [{raw.min()}, {raw.max()}]"
            )

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def rows(self) -> int:
        return int(self._data.shape[0])

    @property
    def cols(self) -> int:
        return int(self._data.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def nbytes(self) -> int:
        return int(self._data.nbytes)

    def tobytes(self) -> bytes:
        """Raw little-endian row-major element bytes (the TMM1 payload)."""
        return self._data.tobytes()

    def checksum(self) -> int:
        return fnv1a_64(self.tobytes())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Matrix):
            return NotImplemented
        return (
            type(self) is type(other)
            and self.shape == other.shape
            and self.tobytes() == other.tobytes()
        )

    def __hash__(self) -> int:
        return hash((type(self).__name__, self.shape, self.checksum()))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(rows={self.rows}, cols={self.cols})"


class Int8Matrix(Matrix):
    """Operand matrix, elements in [-128, 127]."""

    dtype = MatrixDtype.int8


class Int32Matrix(Matrix):
    """Accumulator matrix."""

    dtype = MatrixDtype.int32


class F32Matrix(Matrix):
    """Float reference values; every element must be finite."""

    dtype = MatrixDtype.f32

    def _check_values(self, raw: np.ndarray) -> None:
        values = np.asarray(raw, dtype=np.float64)
        if not np.all(np.isfinite(values)):
            raise ValueError(f"{type(self).__name__} elements must all be finite")
        f32_max = float(np.finfo(np.float32).max)
        if values.size and float(np.max(np.abs(values))) > f32_max:
            raise ValueError(f"{type(self).__name__} elements overflow float32")


_MATRIX_TYPES: dict[MatrixDtype, type[Matrix]] = {
    MatrixDtype.int8: Int8Matrix,
    MatrixDtype.int32: Int32Matrix,
    MatrixDtype.f32: F32Matrix,
}


def matrix_type(dtype: MatrixDtype | str) -> type[Matrix]:
    return _MATRIX_TYPES[MatrixDtype.from_any(dtype)]


def naive_gemm(a: Int8Matrix, b: Int8Matrix) -> Int32Matrix:
    """
    Reference int8 GEMM: ``C[i][j] = sum_k a[i][k] * b[k][j]`` in int32.

    Independent of the tiled engine; every tiled result is checked against it.
    Products and sums are int32 with no saturation, which is exact for
    K <= 131071.

    Raises
    ------
    ShapeError
        If ``a.cols != b.rows``.
    """
    if a.cols != b.rows:
        raise ShapeError(f"cannot multiply {a.rows}x{a.cols} by {b.rows}x{b.cols}: inner dims differ")
    c = np.einsum("ik,kj->ij", a.data.astype(np.int32), b.data.astype(np.int32))
    return Int32Matrix(c)


def random_matrix(
    rows: int, cols: int, seed: int, dtype: MatrixDtype | str = MatrixDtype.int8
) -> Matrix:
    """
    Deterministic random matrix for a given ``(rows, cols, seed, dtype)``.

    int8 elements are uniform over [-128, 127], int32 uniform over the full
    int32 range, f32 elements standard normal.
    """
    if rows < 1 or cols < 1:
        raise ShapeError(f"random matrix shape ({rows}, {cols}) must be at least 1x1")
    dtype = MatrixDtype.from_any(dtype)
    rng = np.random.default_rng(seed)
    if dtype is MatrixDtype.f32:
        data = rng.standard_normal((rows, cols), dtype=np.float32)
    else:
        info = np.iinfo(dtype.numpy_dtype)
        data = rng.integers(
            info.min, info.max, size=(rows, cols), endpoint=True, dtype=dtype.numpy_dtype
        )
    return _MATRIX_TYPES[dtype](data)


def encode_matrix(matrix: Matrix) -> bytes:
    return _HEADER.pack(MAGIC, matrix.dtype.value, _RESERVED, matrix.rows, matrix.cols) + matrix.tobytes()


def decode_matrix(blob: bytes) -> Matrix:
    """Parse a TMM1 byte string; see ``read_matrix`` for the errors raised."""
    if len(blob) < 4 or blob[:4] != MAGIC:
        raise BadMagicError(f"bad magic {bytes(blob[:4])!r}, expected {MAGIC!r}")
    if len(blob) < _HEADER.size:
        raise TruncatedPayloadError(
            f"header needs {_HEADER.size} bytes, file has {len(blob)}"
        )
    _, code, reserved, rows, cols = _HEADER.unpack_from(blob)
    if reserved != _RESERVED:
        raise MatrixFormatError(f"reserved header bytes must be zero, got {reserved.hex()}")
    try:
        dtype = MatrixDtype(code)
    except ValueError as err:
        raise UnknownDtypeError(f"unknown dtype code {code}") from err
    if rows < 1 or cols < 1:
        raise ShapeError(f"header shape ({rows}, {cols}) must be at least 1x1")
    expected = rows * cols * dtype.itemsize
    payload = blob[_HEADER.size :]
    if len(payload) < expected:
        raise TruncatedPayloadError(
            f"{rows}x{cols} {dtype.name} needs {expected} payload bytes, got {len(payload)}"
        )
    if len(payload) > expected:
        raise TruncatedPayloadError(
            f"{len(payload) - expected} trailing bytes after {rows}x{cols} {dtype.name} payload"
        )
    data = np.frombuffer(payload, dtype=dtype.numpy_dtype).reshape(rows, cols)
    return _MATRIX_TYPES[dtype](data)


def write_matrix(path: str | PathLike[str], matrix: Matrix) -> None:
    """Write ``matrix`` to ``path`` in TMM1 format (bit-exact on read-back)."""
    with open(path, "wb") as f:
        f.write(encode_matrix(matrix))
    log.debug("wrote %r to %s", matrix, path)


def read_matrix(path: str | PathLike[str]) -> Matrix:
    """
    Read a TMM1 matrix file.

    Returns an ``Int8Matrix``, ``Int32Matrix`` or ``F32Matrix`` according to
    the dtype code in the header.

    Raises
    ------
    BadMagicError
        The file does not start with ``b"TMM1"``.
    UnknownDtypeError
        The dtype code is not 0, 1 or 2.
    TruncatedPayloadError
        The header or payload is shorter (or longer) than the header promises.
    MatrixFormatError
        The reserved header bytes are not zero.
    """
    with open(path, "rb") as f:
        blob = f.read()
    return decode_matrix(blob)


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = _FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV64_PRIME) & _FNV64_MASK
    return h


def relative_frobenius_error(approx: npt.ArrayLike, exact: npt.ArrayLike) -> float:
    """``||approx - exact||_F / ||exact||_F`` in float64 (0 when both are zero)."""
    approx = np.asarray(approx, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    if approx.shape != exact.shape:
        raise ShapeError(f"shapes {approx.shape} and {exact.shape} differ")
    denom = float(np.linalg.norm(exact))
    num = float(np.linalg.norm(approx - exact))
    if denom == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / denom
