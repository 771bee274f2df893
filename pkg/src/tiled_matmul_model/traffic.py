"""
Closed-form external-memory traffic of the tiled dataflow and its degenerate baselines
"""

from tiled_matmul_model.constants import ACCUMULATOR_BYTES, BLOCK_M, FLOPS_PER_MAC
from tiled_matmul_model.engine import TrafficReport, blocks_for
from tiled_matmul_model.units import NamedEnum


class DataflowKind(NamedEnum):
    persistent_tiled = "persistent_tiled"  # A persistent, B streamed once per call in blocks
    no_persistence = "no_persistence"  # A reloaded on every call
    untiled_naive = "untiled_naive"  # every operand fetched once per MAC
    paper_tiled = "persistent_tiled"  # alias of persistent_tiled


def _check(n: int, k: int, m: int, calls: int) -> None:
    for name, value in (("n", n), ("k", k), ("m", m), ("calls_sharing_a", calls)):
        if value < 1:
            raise ValueError(f"{name}={value} must be at least 1")


def traffic_for(
    kind: DataflowKind | str,
    n: int,
    k: int,
    m: int,
    calls_sharing_a: int = 1,
    *,
    block_m: int = BLOCK_M,
) -> TrafficReport:
    """
    Bytes moved to and from external memory by ``calls_sharing_a`` GEMM calls
    of ``(n×k) @ (k×m)`` that all use the same A.

    ``persistent_tiled`` reads A once and each B element once per call;
    ``no_persistence`` rereads A on every call; ``untiled_naive`` charges one
    external read per operand use (A read m times, B read n times), the
    no-on-chip-memory baseline. C is always written once per call as int32.
    ``b_blocks_streamed`` counts ``block_m``-wide B blocks for the blocked
    dataflows and whole-B passes (one per call) for the naive one.
    """
    kind = DataflowKind.from_any(kind)
    _check(n, k, m, calls_sharing_a)
    calls = calls_sharing_a
    c_bytes = calls * ACCUMULATOR_BYTES * n * m
    if kind is DataflowKind.untiled_naive:
        return TrafficReport(
            a_bytes_read=calls * n * k * m,
            b_bytes_read=calls * k * m * n,
            c_bytes_written=c_bytes,
            a_loads=calls,
            b_blocks_streamed=calls,
        )
    a_loads = 1 if kind is DataflowKind.persistent_tiled else calls
    return TrafficReport(
        a_bytes_read=a_loads * n * k,
        b_bytes_read=calls * k * m,
        c_bytes_written=c_bytes,
        a_loads=a_loads,
        b_blocks_streamed=calls * blocks_for(m, block_m),
    )


def reuse_factor(
    kind: DataflowKind | str, n: int, k: int, m: int, calls_sharing_a: int = 1
) -> float:
    """Total bytes of the ``untiled_naive`` baseline divided by those of ``kind``."""
    baseline = traffic_for(DataflowKind.untiled_naive, n, k, m, calls_sharing_a)
    return baseline.total_bytes / traffic_for(kind, n, k, m, calls_sharing_a).total_bytes


def arithmetic_intensity(
    kind: DataflowKind | str, n: int, k: int, m: int, calls_sharing_a: int = 1
) -> float:
    """FLOPs per external-memory byte."""
    flops = FLOPS_PER_MAC * n * k * m * calls_sharing_a
    return flops / traffic_for(kind, n, k, m, calls_sharing_a).total_bytes


def a_traffic_ratio(n: int, k: int, m: int, calls_sharing_a: int) -> float:
    """A bytes without persistence over A bytes with it (equals ``calls_sharing_a``)."""
    reloaded = traffic_for(DataflowKind.no_persistence, n, k, m, calls_sharing_a)
    persistent = traffic_for(DataflowKind.persistent_tiled, n, k, m, calls_sharing_a)
    return reloaded.a_bytes_read / persistent.a_bytes_read
