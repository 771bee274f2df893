from importlib.metadata import PackageNotFoundError, version

from tiled_matmul_model.attention import QkvResult, QuantizedLinear, project_shared, qkv_project
from tiled_matmul_model.cli import main
from tiled_matmul_model.engine import AcceleratorState, TileConfig, TrafficReport, tiled_gemm
from tiled_matmul_model.matrix import (
    F32Matrix,
    Int8Matrix,
    Int32Matrix,
    MatrixDtype,
    naive_gemm,
    read_matrix,
    write_matrix,
)
from tiled_matmul_model.perf import (
    DeviceProfile,
    HwParams,
    LatencyMode,
    PerfEstimate,
    ResourceEstimate,
    dse_sweep,
    estimate_cycles,
    estimate_resources,
)
from tiled_matmul_model.quantization import QuantParams, calibrate, dequantize, quantize
from tiled_matmul_model.traffic import DataflowKind, traffic_for

try:
    __version__ = version("tiled-matmul-model")
except PackageNotFoundError:
    __version__ = "unknown"

__all__ = [
    "AcceleratorState",
    "DataflowKind",
    "DeviceProfile",
    "F32Matrix",
    "HwParams",
    "Int32Matrix",
    "Int8Matrix",
    "LatencyMode",
    "MatrixDtype",
    "PerfEstimate",
    "QkvResult",
    "QuantParams",
    "QuantizedLinear",
    "ResourceEstimate",
    "TileConfig",
    "TrafficReport",
    "__version__",
    "calibrate",
    "dequantize",
    "dse_sweep",
    "estimate_cycles",
    "estimate_resources",
    "main",
    "naive_gemm",
    "project_shared",
    "qkv_project",
    "quantize",
    "read_matrix",
    "tiled_gemm",
    "traffic_for",
    "write_matrix",
]
