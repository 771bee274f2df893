"""
Quantized linear projections offloaded to the tiled engine
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from os import PathLike

import numpy as np
import numpy.typing as npt

from tiled_matmul_model.engine import AcceleratorState, TrafficReport, tiled_gemm
from tiled_matmul_model.errors import ShapeError
from tiled_matmul_model.matrix import F32Matrix, Int8Matrix, naive_gemm, read_matrix
from tiled_matmul_model.quantization import (
    QuantParams,
    bias_vector,
    calibrate,
    dequantize_gemm_output,
    quantize,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class QuantizedLinear:
    """
    A linear layer ``y = x @ W + b`` whose GEMM runs in int8 on the accelerator.

    The weight is stored pre-transposed (``in_features × out_features``) and
    quantized once at construction; activations are calibrated per call unless
    fixed params are supplied. Bias is added in float after dequantization.

    Examples
    --------
    >>> layer = QuantizedLinear.from_float(random_matrix(768, 768, 1, "f32"))
    >>> y = layer.forward(x, AcceleratorState())
    """

    weight_q: Int8Matrix
    weight_scale: QuantParams
    bias: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.bias is not None:
            row = np.array(bias_vector(self.bias))
            if row.shape[0] != self.weight_q.cols:
                raise ShapeError(
                    f"bias length {row.shape[0]} does not match out_features={self.weight_q.cols}"
                )
            row.setflags(write=False)
            object.__setattr__(self, "bias", row)

    @classmethod
    def from_float(
        cls, weight: F32Matrix, bias: F32Matrix | npt.ArrayLike | None = None
    ) -> "QuantizedLinear":
        """Quantize a float ``in_features × out_features`` weight with max-abs calibration."""
        scale = calibrate(weight)
        return cls(quantize(weight, scale), scale, None if bias is None else bias_vector(bias))

    @classmethod
    def from_files(
        cls,
        weight_path: str | PathLike[str],
        bias_path: str | PathLike[str] | None = None,
        *,
        weight_scale: QuantParams | None = None,
    ) -> "QuantizedLinear":
        """
        Load a layer from TMM1 files.

        An f32 weight file is quantized on load. An int8 weight file is taken
        as already quantized and needs ``weight_scale``. The optional bias file
        holds a single f32 row.
        """
        weight = read_matrix(weight_path)
        bias = None
        if bias_path is not None:
            bias_matrix = read_matrix(bias_path)
            if not isinstance(bias_matrix, F32Matrix):
                raise ValueError(f"bias file {bias_path} must hold f32 data")
            bias = bias_vector(bias_matrix)
        if isinstance(weight, F32Matrix):
            return cls.from_float(weight, bias)
        if isinstance(weight, Int8Matrix):
            if weight_scale is None:
                raise ValueError(f"int8 weight file {weight_path} needs an explicit weight_scale")
            return cls(weight, weight_scale, bias)
        raise ValueError(f"weight file {weight_path} must hold f32 or int8 data")

    @property
    def in_features(self) -> int:
        return self.weight_q.rows

    @property
    def out_features(self) -> int:
        return self.weight_q.cols

    def _activation(
        self, x: F32Matrix, activation_params: QuantParams | None
    ) -> tuple[Int8Matrix, QuantParams]:
        if x.cols != self.in_features:
            raise ShapeError(f"input has {x.cols} features, layer expects {self.in_features}")
        qa = activation_params or calibrate(x)
        return quantize(x, qa), qa

    def forward(
        self,
        x: F32Matrix,
        state: AcceleratorState,
        *,
        reuse_activation: bool = False,
        activation_params: QuantParams | None = None,
    ) -> F32Matrix:
        """
        Quantize ``x``, run the int8 GEMM on ``state`` and dequantize (+ bias).

        With ``reuse_activation`` the quantized ``x`` is assumed to be the A
        already resident on the device and is not transferred again; the
        quantized ``x`` must equal the resident A byte for byte.

        Raises
        ------
        ShapeError
            ``x`` has the wrong number of features, or with ``reuse_activation``
            it differs from the resident A.
        CapacityError
            ``x`` does not fit the persistent A buffer.
        """
        xq, qa = self._activation(x, activation_params)
        if reuse_activation:
            if state.loaded_dims != x.shape:
                raise ShapeError(
                    f"reuse_activation with input {x.rows}x{x.cols} but resident A is {state.loaded_dims}"
                )
            if xq != state.resident_a():
                raise ShapeError("reuse_activation with an input that differs from the resident A")
            acc = tiled_gemm(state, None, self.weight_q, update_a=False)
        else:
            acc = tiled_gemm(state, xq, self.weight_q, update_a=True)
        return dequantize_gemm_output(acc, qa, self.weight_scale, self.bias)

    def forward_reference(
        self, x: F32Matrix, *, activation_params: QuantParams | None = None
    ) -> F32Matrix:
        """Same quantized pipeline with ``naive_gemm`` in place of the engine."""
        xq, qa = self._activation(x, activation_params)
        return dequantize_gemm_output(naive_gemm(xq, self.weight_q), qa, self.weight_scale, self.bias)


@dataclass(frozen=True)
class QkvResult:
    q: F32Matrix
    k: F32Matrix
    v: F32Matrix
    traffic_snapshot: TrafficReport  # delta over the three projections


def project_shared(
    x: F32Matrix,
    layers: Sequence[QuantizedLinear],
    state: AcceleratorState,
    *,
    activation_params: QuantParams | None = None,
) -> tuple[list[F32Matrix], TrafficReport]:
    """
    Run several layers over one activation, loading it onto the device once.

    The first layer uploads the quantized ``x``; the rest reuse it. Returns
    the outputs in layer order and the traffic the calls generated.
    """
    if not layers:
        raise ValueError("project_shared needs at least one layer")
    widths = {layer.in_features for layer in layers}
    if widths != {x.cols}:
        raise ShapeError(f"layers expect in_features {sorted(widths)}, input has {x.cols}")
    qa = activation_params or calibrate(x)
    before = state.traffic
    outputs = [
        layer.forward(x, state, reuse_activation=i > 0, activation_params=qa)
        for i, layer in enumerate(layers)
    ]
    delta = state.traffic - before
    log.debug("projected %d layers over %dx%d input, A loads %d", len(layers), x.rows, x.cols, delta.a_loads)
    return outputs, delta


def qkv_project(
    x: F32Matrix,
    wq: QuantizedLinear,
    wk: QuantizedLinear,
    wv: QuantizedLinear,
    state: AcceleratorState,
    *,
    activation_params: QuantParams | None = None,
) -> QkvResult:
    """Q, K and V projections of ``x`` with a single activation upload."""
    (q, k, v), delta = project_shared(x, [wq, wk, wv], state, activation_params=activation_params)
    return QkvResult(q=q, k=k, v=v, traffic_snapshot=delta)


def float_linear(x: F32Matrix, weight: F32Matrix, bias: npt.ArrayLike | None = None) -> np.ndarray:
    """Float64 ``x @ W (+ b)``, the accuracy oracle for quantized layers."""
    out = x.data.astype(np.float64) @ weight.data.astype(np.float64)
    if bias is not None:
        out = out + bias_vector(bias)
    return out
