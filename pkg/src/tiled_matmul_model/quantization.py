"""
Symmetric per-tensor int8 quantization
"""

import math
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from tiled_matmul_model.constants import QUANT_MAX
from tiled_matmul_model.errors import ShapeError
from tiled_matmul_model.matrix import F32Matrix, Int8Matrix, Int32Matrix


@dataclass(frozen=True)
class QuantParams:
    """Real value ≈ ``scale * code``; zero-point is always 0."""

    scale: float
    zero_point: int = 0

    def __post_init__(self) -> None:
        if not math.isfinite(self.scale) or self.scale <= 0:
            raise ValueError(f"scale={self.scale} must be positive and finite")
        if self.zero_point != 0:
            raise ValueError(f"zero_point={self.zero_point} must be 0 for symmetric quantization")


def calibrate(x: F32Matrix | npt.ArrayLike) -> QuantParams:
    """
    Max-abs calibration: ``scale = max|x| / 127``, or 1.0 for an all-zero tensor.

    Raises
    ------
    ValueError
        If ``x`` is empty or holds a non-finite value.
    """
    values = np.asarray(x.data if isinstance(x, F32Matrix) else x, dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot calibrate an empty tensor")
    if not np.all(np.isfinite(values)):
        raise ValueError("cannot calibrate a tensor with non-finite values")
    max_abs = float(np.max(np.abs(values)))
    if max_abs == 0.0:
        return QuantParams(1.0)
    return QuantParams(max_abs / QUANT_MAX)


def _round_half_away_from_zero(v: np.ndarray) -> np.ndarray:
    return np.sign(v) * np.floor(np.abs(v) + 0.5)


def quantize(x: F32Matrix, q: QuantParams) -> Int8Matrix:
    """``clamp(round_half_away_from_zero(x / scale), -127, 127)``, same shape as ``x``."""
    scaled = x.data.astype(np.float64) / q.scale
    codes = np.clip(_round_half_away_from_zero(scaled), -QUANT_MAX, QUANT_MAX)
    return Int8Matrix(codes.astype(np.int8))


def dequantize(codes: Int8Matrix, q: QuantParams) -> F32Matrix:
    return F32Matrix(codes.data.astype(np.float64) * q.scale)


def dequantize_gemm_output(
    c: Int32Matrix,
    qa: QuantParams,
    qb: QuantParams,
    bias: F32Matrix | npt.ArrayLike | None = None,
) -> F32Matrix:
    """
    ``out[i][j] = c[i][j] * qa.scale * qb.scale (+ bias[j])``.

    ``bias`` may be a 1-D sequence or a 1×cols ``F32Matrix``.

    Raises
    ------
    ShapeError
        If the bias length differs from ``c.cols``.
    """
    out = c.data.astype(np.float64) * (qa.scale * qb.scale)
    if bias is not None:
        bias_row = bias_vector(bias)
        if bias_row.shape[0] != c.cols:
            raise ShapeError(f"bias length {bias_row.shape[0]} does not match {c.cols} output columns")
        out = out + bias_row
    return F32Matrix(out)


def bias_vector(bias: F32Matrix | npt.ArrayLike) -> np.ndarray:
    """Flatten a bias given as a row matrix or sequence into a float64 vector."""
    if isinstance(bias, F32Matrix):
        if bias.rows != 1:
            raise ShapeError(f"bias matrix must be a single row, got {bias.rows}x{bias.cols}")
        return bias.data[0].astype(np.float64)
    row = np.asarray(bias, dtype=np.float64)
    if row.ndim != 1:
        raise ShapeError(f"bias must be 1-D, got shape {row.shape}")
    if not np.all(np.isfinite(row)):
        raise ValueError("bias elements must all be finite")
    return row
