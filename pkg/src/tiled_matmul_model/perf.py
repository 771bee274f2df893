"""
Analytic cycle, throughput and resource model of the accelerator
"""

import csv
import logging
import math
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass
from typing import IO, Any

import numpy as np
import pint

from tiled_matmul_model.constants import (
    ACCUMULATOR_BYTES,
    BRAM_BLOCK_BYTES,
    BRAM_BLOCKS_TOTAL,
    BRAM_MARGIN,
    BUS_BYTES_PER_CYCLE,
    CLOCK_HZ,
    DEVICE_NAME,
    DSP_TOTAL,
    FF_TOTAL,
    FLOPS_PER_MAC,
    LUT_TOTAL,
    PIPELINE_FILL,
)
from tiled_matmul_model.engine import TileConfig
from tiled_matmul_model.units import ByteUnit, NamedEnum, byte_quantity, ureg

log = logging.getLogger(__name__)

Dims = tuple[int, int, int]


class LatencyMode(NamedEnum):
    """How transfers and compute are combined into one latency figure."""

    compute = "compute"  # MAC array only
    serial = "serial"  # load A, stream B, compute, store C one after another
    overlapped = "overlapped"  # B streaming hidden under compute


@dataclass(frozen=True)
class HwParams:
    """
    Clock and interface parameters of the cycle model.

    ``bus_bytes_per_cycle`` is the external-memory bandwidth per PL clock and
    ``pipeline_fill`` the fill/drain cycles each output tile pays on top of its
    K-long II=1 accumulation.
    """

    clock_hz: float = CLOCK_HZ
    bus_bytes_per_cycle: int = BUS_BYTES_PER_CYCLE
    pipeline_fill: int = PIPELINE_FILL

    def __post_init__(self) -> None:
        if not math.isfinite(self.clock_hz) or self.clock_hz <= 0:
            raise ValueError(f"clock_hz={self.clock_hz} must be positive and finite")
        if self.bus_bytes_per_cycle < 1:
            raise ValueError(f"bus_bytes_per_cycle={self.bus_bytes_per_cycle} must be at least 1")
        if self.pipeline_fill < 0:
            raise ValueError(f"pipeline_fill={self.pipeline_fill} must be non-negative")

    @staticmethod
    def macs_per_cycle(config: TileConfig) -> int:
        """The fully unrolled T×T array retires T² MACs per cycle."""
        return config.tile_size * config.tile_size

    def peak_gflops(self, config: TileConfig) -> float:
        return FLOPS_PER_MAC * self.macs_per_cycle(config) * self.clock_hz / 1e9

    @property
    def bus_bytes_per_second(self) -> float:
        return self.bus_bytes_per_cycle * self.clock_hz


@dataclass(frozen=True)
class PerfEstimate:
    """Modeled cycles, latency and throughput of one GEMM call."""

    n: int
    k: int
    m: int
    tile_size: int
    macs_per_cycle: int
    mac_count: int
    flops: int
    compute_cycles: int
    a_load_cycles: int
    b_load_cycles: int
    c_store_cycles: int
    total_cycles_serial: int
    total_cycles_overlapped: int
    clock_hz: float
    latency_compute_s: float
    latency_serial_s: float
    latency_overlapped_s: float
    gflops_compute: float
    gflops_serial: float
    gflops_overlapped: float
    peak_gflops: float

    def cycles(self, mode: LatencyMode | str = LatencyMode.serial) -> int:
        mode = LatencyMode.from_any(mode)
        return {
            LatencyMode.compute: self.compute_cycles,
            LatencyMode.serial: self.total_cycles_serial,
            LatencyMode.overlapped: self.total_cycles_overlapped,
        }[mode]

    def latency(self, mode: LatencyMode | str = LatencyMode.serial) -> float:
        return self.cycles(mode) / self.clock_hz

    def latency_quantity(self, mode: LatencyMode | str = LatencyMode.serial) -> pint.Quantity:
        return ureg.Quantity(self.latency(mode), "second")

    def gflops(self, mode: LatencyMode | str = LatencyMode.serial) -> float:
        return self.flops / self.latency(mode) / 1e9


@dataclass(frozen=True)
class DeviceProfile:
    """Programmable-logic totals of a target part; LUT/FF are informational."""

    name: str = DEVICE_NAME
    dsp_total: int = DSP_TOTAL
    bram_blocks_total: int = BRAM_BLOCKS_TOTAL
    lut_total: int = LUT_TOTAL
    ff_total: int = FF_TOTAL

    def __post_init__(self) -> None:
        for name in ("dsp_total", "bram_blocks_total", "lut_total", "ff_total"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name}={getattr(self, name)} must be positive")

    @classmethod
    def xck26(cls) -> "DeviceProfile":
        return cls()


@dataclass(frozen=True)
class ResourceEstimate:
    """
    DSP and BRAM demand of a configuration against a device.

    ``feasible`` applies the BRAM utilization margin; ``fits_device`` is the
    raw comparison against every block on the part.
    """

    dsp_estimate: int
    lut_spill: int
    bram_bytes: int
    bram_blocks: int
    bram_budget_blocks: int
    dsp_utilization: float
    bram_utilization: float
    fits_device: bool
    feasible: bool

    def bram_quantity(self, unit: ByteUnit | str = ByteUnit.KiB) -> pint.Quantity:
        return byte_quantity(self.bram_bytes, unit)


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def _check_dims(n: int, k: int, m: int) -> None:
    for name, value in (("n", n), ("k", k), ("m", m)):
        if value < 1:
            raise ValueError(f"{name}={value} must be at least 1")


def estimate_cycles(
    n: int,
    k: int,
    m: int,
    config: TileConfig | None = None,
    hw: HwParams | None = None,
    *,
    update_a: bool = True,
) -> PerfEstimate:
    """
    Closed-form cycle estimate for ``(n×k) @ (k×m)``.

    Each T×T output tile pipelines its K-long accumulation at II=1 plus
    ``pipeline_fill``, so ``compute = ceil(n/T)·ceil(m/T)·(k + fill)``.
    Transfers move ``bus_bytes_per_cycle`` bytes per cycle; A is only charged
    when ``update_a``. The serial total adds everything; the overlapped total
    hides B streaming under compute.
    """
    _check_dims(n, k, m)
    config = config or TileConfig()
    hw = hw or HwParams()
    t = config.tile_size
    bus = hw.bus_bytes_per_cycle

    compute = _ceil_div(n, t) * _ceil_div(m, t) * (k + hw.pipeline_fill)
    a_load = _ceil_div(n * k, bus) if update_a else 0
    b_load = _ceil_div(k * m, bus)
    c_store = _ceil_div(ACCUMULATOR_BYTES * n * m, bus)
    serial = a_load + b_load + compute + c_store
    overlapped = a_load + max(compute, b_load) + c_store

    macs = n * k * m
    flops = FLOPS_PER_MAC * macs

    def seconds(cycles: int) -> float:
        return cycles / hw.clock_hz

    def gflops(cycles: int) -> float:
        return flops / seconds(cycles) / 1e9

    return PerfEstimate(
        n=n,
        k=k,
        m=m,
        tile_size=t,
        macs_per_cycle=hw.macs_per_cycle(config),
        mac_count=macs,
        flops=flops,
        compute_cycles=compute,
        a_load_cycles=a_load,
        b_load_cycles=b_load,
        c_store_cycles=c_store,
        total_cycles_serial=serial,
        total_cycles_overlapped=overlapped,
        clock_hz=hw.clock_hz,
        latency_compute_s=seconds(compute),
        latency_serial_s=seconds(serial),
        latency_overlapped_s=seconds(overlapped),
        gflops_compute=gflops(compute),
        gflops_serial=gflops(serial),
        gflops_overlapped=gflops(overlapped),
        peak_gflops=hw.peak_gflops(config),
    )


def estimate_resources(
    config: TileConfig | None = None,
    device: DeviceProfile | None = None,
    *,
    bram_margin: float = BRAM_MARGIN,
) -> ResourceEstimate:
    """
    DSP/BRAM estimate: one DSP per multiplier of the T×T array, BRAM for the
    persistent A buffer plus one ``max_k × block_m`` block of B.

    Multipliers beyond the device's DSPs are reported as ``lut_spill``.
    ``bram_margin`` is the fraction of BRAM blocks a design may realistically
    use (routing and control eat the rest); pass 1.0 to compare against the raw
    total.
    """
    if not 0 < bram_margin <= 1:
        raise ValueError(f"bram_margin={bram_margin} must be in (0, 1]")
    config = config or TileConfig()
    device = device or DeviceProfile()

    dsp = config.tile_size * config.tile_size
    bram_bytes = config.a_buffer_bytes + config.b_block_bytes
    bram_blocks = _ceil_div(bram_bytes, BRAM_BLOCK_BYTES)
    budget = math.floor(device.bram_blocks_total * bram_margin)
    dsp_ok = dsp <= device.dsp_total
    return ResourceEstimate(
        dsp_estimate=dsp,
        lut_spill=max(0, dsp - device.dsp_total),
        bram_bytes=bram_bytes,
        bram_blocks=bram_blocks,
        bram_budget_blocks=budget,
        dsp_utilization=dsp / device.dsp_total,
        bram_utilization=bram_blocks / device.bram_blocks_total,
        fits_device=dsp_ok and bram_blocks <= device.bram_blocks_total,
        feasible=dsp_ok and bram_blocks <= budget,
    )


def roofline_gflops(intensity: float, config: TileConfig | None = None, hw: HwParams | None = None) -> float:
    """Attainable GFLOP/s at ``intensity`` FLOPs per external byte."""
    if intensity <= 0:
        raise ValueError(f"intensity={intensity} must be positive")
    config = config or TileConfig()
    hw = hw or HwParams()
    return min(hw.peak_gflops(config), intensity * hw.bus_bytes_per_second / 1e9)


# Stable CSV/JSON column order of sweep tables.
SWEEP_COLUMNS = (
    "t",
    "block_m",
    "n",
    "k",
    "m",
    "compute_cycles",
    "total_cycles",
    "latency_s",
    "gflops",
    "dsp",
    "bram_blocks",
    "feasible",
)

_SWEEP_UNITS = {
    "latency_s": "second",
    # GFLOP/s, FLOPs being counts
    "gflops": "1 / nanosecond",
}


@dataclass(frozen=True)
class SweepEntry:
    config: TileConfig
    perf: PerfEstimate
    resources: ResourceEstimate

    def record(self) -> dict[str, Any]:
        """One sweep row keyed by ``SWEEP_COLUMNS``."""
        return {
            "t": self.config.tile_size,
            "block_m": self.config.block_m,
            "n": self.perf.n,
            "k": self.perf.k,
            "m": self.perf.m,
            "compute_cycles": self.perf.compute_cycles,
            "total_cycles": self.perf.total_cycles_serial,
            "latency_s": self.perf.latency_serial_s,
            "gflops": self.perf.gflops_serial,
            "dsp": self.resources.dsp_estimate,
            "bram_blocks": self.resources.bram_blocks,
            "feasible": self.resources.feasible,
        }


class SweepTable(Mapping[str, np.ndarray]):
    """
    Result of ``dse_sweep``: a read-only, column-oriented mapping
    (``table["compute_cycles"]`` is an array with one value per row) plus the
    full per-row ``entries`` and a ``.units`` dict (column -> ``pint.Unit``).
    """

    def __init__(self, entries: Iterable[SweepEntry]) -> None:
        self.entries = tuple(entries)
        records = [e.record() for e in self.entries]
        self._columns = {c: np.array([r[c] for r in records]) for c in SWEEP_COLUMNS}

    @property
    def units(self) -> dict[str, pint.Unit]:
        return {c: ureg.Unit(_SWEEP_UNITS.get(c, "dimensionless")) for c in SWEEP_COLUMNS}

    def __getitem__(self, key: str) -> np.ndarray:
        return self._columns[key]

    def __iter__(self) -> Iterator[str]:
        return iter(SWEEP_COLUMNS)

    def __len__(self) -> int:
        return len(SWEEP_COLUMNS)

    @property
    def n_rows(self) -> int:
        return len(self.entries)

    def records(self) -> list[dict[str, Any]]:
        return [e.record() for e in self.entries]

    def write_csv(self, stream: IO[str]) -> None:
        writer = csv.DictWriter(stream, fieldnames=list(SWEEP_COLUMNS), lineterminator="\n")
        writer.writeheader()
        for row in self.records():
            writer.writerow(row)


def dse_sweep(
    dims: Iterable[Dims],
    tile_sizes: Iterable[int],
    block_ms: Iterable[int],
    hw: HwParams | None = None,
    device: DeviceProfile | None = None,
    *,
    base: TileConfig | None = None,
    update_a: bool = True,
    bram_margin: float = BRAM_MARGIN,
) -> SweepTable:
    """
    Evaluate every ``(dims, T, block_m)`` combination with both estimators.

    Rows are ordered by T, then block_m, then dims. Buffer capacities
    (``max_n``, ``max_k``) come from ``base``.

    Raises
    ------
    ValueError
        If any of the three lists is empty.
    """
    dims_list: Sequence[Dims] = list(dims)
    ts = list(tile_sizes)
    bms = list(block_ms)
    for name, values in (("dims", dims_list), ("tile_sizes", ts), ("block_ms", bms)):
        if not values:
            raise ValueError(f"{name} must not be empty")
    hw = hw or HwParams()
    device = device or DeviceProfile()
    base = base or TileConfig()

    entries = []
    for t in ts:
        for bm in bms:
            config = TileConfig(tile_size=t, block_m=bm, max_n=base.max_n, max_k=base.max_k)
            resources = estimate_resources(config, device, bram_margin=bram_margin)
            if not resources.feasible:
                log.info(
                    "T=%d block_m=%d infeasible on %s: dsp %d/%d, bram %d/%d blocks (%s)",
                    t,
                    bm,
                    device.name,
                    resources.dsp_estimate,
                    device.dsp_total,
                    resources.bram_blocks,
                    resources.bram_budget_blocks,
                    f"{resources.bram_quantity():~.0f}",
                )
            for n, k, m in dims_list:
                perf = estimate_cycles(n, k, m, config, hw, update_a=update_a)
                entries.append(SweepEntry(config, perf, resources))
    return SweepTable(tuple(entries))
