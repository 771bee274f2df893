"""
Functional model of the two-level tiled int8 GEMM accelerator
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from tiled_matmul_model.constants import ACCUMULATOR_BYTES, BLOCK_M, MAX_K, MAX_N, TILE_SIZE
from tiled_matmul_model.errors import CapacityError, ProtocolError, ShapeError
from tiled_matmul_model.matrix import Int8Matrix, Int32Matrix, fnv1a_64

log = logging.getLogger(__name__)


def _check_count(name: str, value: int) -> None:
    if isinstance(value, bool) or not isinstance(value, int):
        raise TypeError(f"{name} must be an int, got {type(value).__name__}")
    if value < 1:
        raise ValueError(f"{name}={value} must be at least 1")


@dataclass(frozen=True)
class TileConfig:
    """
    Dataflow parameters of the accelerator.

    Attributes
    ----------
    tile_size : int
        Edge ``T`` of the inner T×T tiles (and of the T×T MAC array).
    block_m : int
        Columns of B loaded into on-chip memory per outer block.
    max_n, max_k : int
        Rows/cols capacity of the persistent A buffer.
    """

    tile_size: int = TILE_SIZE
    block_m: int = BLOCK_M
    max_n: int = MAX_N
    max_k: int = MAX_K

    def __post_init__(self) -> None:
        for name in ("tile_size", "block_m", "max_n", "max_k"):
            _check_count(name, getattr(self, name))

    @property
    def a_buffer_bytes(self) -> int:
        return self.max_n * self.max_k

    @property
    def b_block_bytes(self) -> int:
        return self.max_k * self.block_m


@dataclass(frozen=True)
class TrafficReport:
    """External-memory traffic in bytes plus transfer event counts."""

    a_bytes_read: int = 0
    b_bytes_read: int = 0
    c_bytes_written: int = 0
    a_loads: int = 0
    b_blocks_streamed: int = 0

    @property
    def total_bytes(self) -> int:
        return self.a_bytes_read + self.b_bytes_read + self.c_bytes_written

    def __add__(self, other: "TrafficReport") -> "TrafficReport":
        return TrafficReport(
            a_bytes_read=self.a_bytes_read + other.a_bytes_read,
            b_bytes_read=self.b_bytes_read + other.b_bytes_read,
            c_bytes_written=self.c_bytes_written + other.c_bytes_written,
            a_loads=self.a_loads + other.a_loads,
            b_blocks_streamed=self.b_blocks_streamed + other.b_blocks_streamed,
        )

    def __sub__(self, other: "TrafficReport") -> "TrafficReport":
        """Delta between two snapshots of the same (monotonic) counters."""
        return TrafficReport(
            a_bytes_read=self.a_bytes_read - other.a_bytes_read,
            b_bytes_read=self.b_bytes_read - other.b_bytes_read,
            c_bytes_written=self.c_bytes_written - other.c_bytes_written,
            a_loads=self.a_loads - other.a_loads,
            b_blocks_streamed=self.b_blocks_streamed - other.b_blocks_streamed,
        )


@dataclass(eq=False)
class AcceleratorState:
    """
    One modeled device between calls: the persistent A buffer, the dims of
    the resident A and cumulative traffic counters.

    A state models a single physical device; hand it to one caller at a time.
    Independent states may be used concurrently.
    """

    config: TileConfig = field(default_factory=TileConfig)
    loaded_dims: tuple[int, int] | None = field(default=None, init=False)
    traffic: TrafficReport = field(default_factory=TrafficReport, init=False)

    def __post_init__(self) -> None:
        self._a_buffer = np.zeros((self.config.max_n, self.config.max_k), dtype=np.int8)

    @property
    def a_buffer(self) -> np.ndarray:
        """Read-only view of the whole persistent buffer (capacity max_n × max_k)."""
        view = self._a_buffer.view()
        view.setflags(write=False)
        return view

    def resident_a(self) -> Int8Matrix:
        if self.loaded_dims is None:
            raise ProtocolError("no A matrix is resident; call with update_a=True first")
        n, k = self.loaded_dims
        return Int8Matrix(self._a_buffer[:n, :k])

    def a_buffer_checksum(self) -> int:
        return fnv1a_64(self._a_buffer.tobytes())

    def reset(self) -> None:
        """Forget the resident A and zero the traffic counters."""
        self.loaded_dims = None
        self.traffic = TrafficReport()

    def _load_a(self, a: Int8Matrix) -> None:
        cfg = self.config
        if a.rows > cfg.max_n or a.cols > cfg.max_k:
            raise CapacityError(
                f"A is {a.rows}x{a.cols} but the persistent buffer holds at most "
                f"{cfg.max_n}x{cfg.max_k}"
            )
        self._a_buffer[: a.rows, : a.cols] = a.data
        self.loaded_dims = (a.rows, a.cols)


def tiled_gemm(
    state: AcceleratorState,
    a: Int8Matrix | None,
    b: Int8Matrix,
    *,
    update_a: bool = True,
) -> Int32Matrix:
    """
    Run ``C = A × B`` through the two-level tiled dataflow.

    With ``update_a`` the new A is copied into the persistent buffer first;
    without it the resident A is reused and ``a`` is ignored. B is streamed in
    column blocks of ``block_m``; each block is processed as T×T output tiles
    accumulated over K in steps of T. Edge tiles are handled by clamping loop
    bounds. The result is bit-identical to ``naive_gemm`` on the effective
    operands.

    Raises
    ------
    ProtocolError
        ``update_a=False`` with no resident A, or ``update_a=True`` with ``a`` missing.
    CapacityError
        A exceeds ``max_n`` × ``max_k``.
    ShapeError
        ``b.rows`` differs from the K of the (resident or new) A.
    """
    cfg = state.config
    if update_a:
        if a is None:
            raise ProtocolError("update_a=True needs an A matrix")
        if a.cols != b.rows:
            raise ShapeError(f"cannot multiply {a.rows}x{a.cols} by {b.rows}x{b.cols}: inner dims differ")
        state._load_a(a)
    else:
        if state.loaded_dims is None:
            raise ProtocolError("update_a=False but no A matrix has been loaded")
        if a is not None:
            log.warning("update_a=False: ignoring the A operand passed in, reusing the resident A")
        if b.rows != state.loaded_dims[1]:
            raise ShapeError(
                f"B has {b.rows} rows but the resident A is "
                f"{state.loaded_dims[0]}x{state.loaded_dims[1]}"
            )

    n, k = state.loaded_dims  # type: ignore[misc]
    m = b.cols
    t = cfg.tile_size
    # The accumulator and operands are widened once; the array holds int32 end to end.
    a_bram = state._a_buffer[:n, :k].astype(np.int32)
    b_dram = b.data
    c = np.zeros((n, m), dtype=np.int32)

    blocks = 0
    for j_block in range(0, m, cfg.block_m):
        current_block_m = min(cfg.block_m, m - j_block)
        b_bram = b_dram[:, j_block : j_block + current_block_m].astype(np.int32)
        blocks += 1
        for i0 in range(0, n, t):
            i1 = min(i0 + t, n)
            for j0 in range(0, current_block_m, t):
                j1 = min(j0 + t, current_block_m)
                local_c = np.zeros((i1 - i0, j1 - j0), dtype=np.int32)
                for k0 in range(0, k, t):
                    k1 = min(k0 + t, k)
                    local_a = a_bram[i0:i1, k0:k1]
                    local_b = b_bram[k0:k1, j0:j1]
                    local_c += local_a @ local_b
                c[i0:i1, j_block + j0 : j_block + j1] = local_c

    delta = TrafficReport(
        a_bytes_read=n * k if update_a else 0,
        b_bytes_read=k * m,
        c_bytes_written=n * m * ACCUMULATOR_BYTES,
        a_loads=1 if update_a else 0,
        b_blocks_streamed=blocks,
    )
    state.traffic = state.traffic + delta
    log.debug(
        "tiled_gemm n=%d k=%d m=%d T=%d block_m=%d update_a=%s blocks=%d",
        n,
        k,
        m,
        t,
        cfg.block_m,
        update_a,
        blocks,
    )
    return Int32Matrix(c)


def blocks_for(m: int, block_m: int) -> int:
    return math.ceil(m / block_m)


def reset(state: AcceleratorState) -> None:
    state.reset()

