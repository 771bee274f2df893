"""
Machine-readable reports emitted by the command-line interface
"""

from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field

from tiled_matmul_model.engine import TileConfig, TrafficReport
from tiled_matmul_model.perf import HwParams, PerfEstimate, ResourceEstimate

SCHEMA_VERSION = 1


def format_checksum(value: int) -> str:
    return f"{value:016x}"


class Dims(BaseModel):
    n: int
    k: int
    m: int


class Report(BaseModel):
    """Fields shared by every report; ``schema`` versions the layout."""

    model_config = ConfigDict(populate_by_name=True)

    schema_version: Literal[1] = Field(default=SCHEMA_VERSION, alias="schema")
    command: list[str]

    def to_json(self) -> str:
        return self.model_dump_json(by_alias=True, indent=2) + "\n"


class RunReport(Report):
    dims: Dims
    config: TileConfig
    hw: HwParams
    wall_time_seconds: float
    checksum: str  # FNV-1a-64 of the raw C bytes, hex
    perf: PerfEstimate
    traffic: TrafficReport
    passed: bool | None = None
    output_path: str | None = None


class BenchReport(RunReport):
    case: str
    wall_time_trials_seconds: list[float]
    resources: ResourceEstimate
    arithmetic_intensity: float  # FLOPs per external byte
    roofline_gflops: float


class TrialResult(BaseModel):
    index: int
    seed: int
    n: int
    k: int
    m: int
    tile_size: int
    block_m: int
    passed: bool
    checksum: str


class VerifyReport(Report):
    trials: list[TrialResult]
    passed: bool
    first_failure: TrialResult | None = None
    wall_time_seconds: float


class ProjectionResult(BaseModel):
    name: str
    rows: int
    cols: int
    relative_error: float
    bit_exact: bool
    checksum: str


class AttentionReport(Report):
    seq: int
    hidden: int
    out_features: int
    seed: int
    config: TileConfig
    projections: list[ProjectionResult]
    max_relative_error: float
    error_bound: float
    within_bound: bool
    a_loads: int
    a_bytes_read: int
    traffic: TrafficReport
    wall_time_seconds: float


class SweepRow(BaseModel):
    t: int
    block_m: int
    n: int
    k: int
    m: int
    compute_cycles: int
    total_cycles: int
    latency_s: float
    gflops: float
    dsp: int
    bram_blocks: int
    feasible: bool


class SweepReport(Report):
    hw: HwParams
    bram_margin: float
    rows: list[SweepRow]


class TrafficRow(BaseModel):
    kind: str
    n: int
    k: int
    m: int
    calls: int
    a_bytes: int
    b_bytes: int
    c_bytes: int
    total_bytes: int
    reuse_factor: float
    arithmetic_intensity: float


class TrafficTableReport(Report):
    rows: list[TrafficRow]
    a_traffic_ratio: float


REPORT_MODELS: dict[str, type[Report]] = {
    "gemm": RunReport,
    "verify": VerifyReport,
    "bench": BenchReport,
    "dse": SweepReport,
    "traffic": TrafficTableReport,
    "attn-demo": AttentionReport,
}


def json_schemas() -> dict[str, dict[str, Any]]:
    """Published JSON schema of each command's report, keyed by subcommand."""
    return {
        name: model.model_json_schema(by_alias=True) for name, model in REPORT_MODELS.items()
    }
