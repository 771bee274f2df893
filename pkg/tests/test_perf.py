"""
Cycle, resource and design-space estimates for the default xck26 target.
"""

import io

import pandas as pd
import pytest

from tiled_matmul_model.constants import BENCH_CASES
from tiled_matmul_model.engine import AcceleratorState, TileConfig, tiled_gemm
from tiled_matmul_model.matrix import Int8Matrix, random_matrix
from tiled_matmul_model.perf import (
    SWEEP_COLUMNS,
    DeviceProfile,
    HwParams,
    LatencyMode,
    dse_sweep,
    estimate_cycles,
    estimate_resources,
    roofline_gflops,
)
from tiled_matmul_model.units import ureg

FFN = BENCH_CASES["ffn"]


def test_ffn_compute_cycles_and_throughput():
    p = estimate_cycles(*FFN)
    assert p.compute_cycles == 148_992
    assert p.mac_count == 64 * 768 * 3072
    assert p.flops == 2 * p.mac_count
    assert p.macs_per_cycle == 1024
    assert p.peak_gflops == pytest.approx(204.8)
    assert p.gflops_compute == pytest.approx(p.flops / (148_992 / 1e8) / 1e9)
    assert 200.0 < p.gflops_compute < p.peak_gflops


def test_ffn_transfer_and_total_cycles():
    p = estimate_cycles(*FFN)
    assert p.a_load_cycles == 3072
    assert p.b_load_cycles == 147_456
    assert p.c_store_cycles == 49_152
    assert p.total_cycles_serial == 348_672
    assert p.total_cycles_overlapped == 3072 + 148_992 + 49_152
    assert p.latency_serial_s == pytest.approx(348_672 / 1e8)
    assert p.gflops_serial == pytest.approx(p.flops / 348_672e-8 / 1e9)


def test_latency_modes_agree_with_fields():
    p = estimate_cycles(*FFN)
    assert p.cycles(LatencyMode.compute) == p.compute_cycles
    assert p.cycles("serial") == p.total_cycles_serial
    assert p.latency("overlapped") == pytest.approx(p.latency_overlapped_s)
    assert p.gflops("compute") == pytest.approx(p.gflops_compute)
    assert p.latency_quantity().to(ureg.millisecond).magnitude == pytest.approx(3.48672)
    assert p.total_cycles_overlapped <= p.total_cycles_serial


def test_halving_tile_size_quadruples_compute():
    p32 = estimate_cycles(*FFN, TileConfig(tile_size=32))
    p16 = estimate_cycles(*FFN, TileConfig(tile_size=16))
    assert p16.compute_cycles == 595_968
    assert p16.compute_cycles == 4 * p32.compute_cycles


def test_partial_tiles_round_up():
    assert estimate_cycles(63, 767, 3071).compute_cycles == 148_800
    assert estimate_cycles(1, 1, 1).compute_cycles == 1 + 8


def test_update_a_false_drops_a_load():
    p = estimate_cycles(*FFN, update_a=False)
    assert p.a_load_cycles == 0
    assert p.total_cycles_serial == 348_672 - 3072


def test_estimate_cycles_rejects_bad_dims():
    with pytest.raises(ValueError):
        estimate_cycles(0, 768, 768)


def test_hw_params_validation_and_clock_scaling():
    with pytest.raises(ValueError):
        HwParams(clock_hz=0)
    with pytest.raises(ValueError):
        HwParams(bus_bytes_per_cycle=0)
    with pytest.raises(ValueError):
        HwParams(pipeline_fill=-1)
    slow = estimate_cycles(*FFN, hw=HwParams(clock_hz=50e6))
    fast = estimate_cycles(*FFN)
    assert slow.compute_cycles == fast.compute_cycles
    assert slow.latency_serial_s == pytest.approx(2 * fast.latency_serial_s)


def test_default_resources_fit():
    r = estimate_resources()
    assert r.dsp_estimate == 1024
    assert r.lut_spill == 0
    assert r.bram_bytes == 245_760
    assert r.bram_blocks == 54
    assert r.bram_budget_blocks == 126
    assert r.dsp_utilization == pytest.approx(1024 / 1248)
    assert r.feasible and r.fits_device
    assert r.bram_quantity().to(ureg.kibibyte).magnitude == pytest.approx(240.0)
    assert r.bram_quantity("B").magnitude == pytest.approx(245_760)


def test_bram_margin_makes_wide_block_infeasible():
    r = estimate_resources(TileConfig(block_m=768))
    assert r.bram_bytes == 638_976
    assert r.bram_blocks == 139
    assert r.fits_device  # 139 <= 144 raw blocks
    assert not r.feasible  # but above floor(144 * 0.88)
    assert estimate_resources(TileConfig(block_m=768), bram_margin=1.0).feasible


def test_t64_exceeds_dsps():
    r = estimate_resources(TileConfig(tile_size=64))
    assert r.dsp_estimate == 4096
    assert r.lut_spill == 4096 - 1248
    assert not r.feasible


def test_resource_estimate_rejects_bad_margin():
    with pytest.raises(ValueError):
        estimate_resources(bram_margin=0.0)
    with pytest.raises(ValueError):
        estimate_resources(bram_margin=1.5)


def test_device_profile():
    assert DeviceProfile.xck26() == DeviceProfile()
    assert DeviceProfile().dsp_total == 1248
    with pytest.raises(ValueError):
        DeviceProfile(dsp_total=0)
    small = DeviceProfile(name="tiny", dsp_total=256, bram_blocks_total=60)
    assert not estimate_resources(device=small).feasible


def test_roofline():
    assert roofline_gflops(1.0) == pytest.approx(1.6)
    assert roofline_gflops(1000.0) == pytest.approx(204.8)
    with pytest.raises(ValueError):
        roofline_gflops(0.0)


def test_dse_sweep_rows_and_order():
    table = dse_sweep([FFN, BENCH_CASES["attn"]], [16, 32, 64], [256, 768])
    assert table.n_rows == 3 * 2 * 2
    assert list(table) == list(SWEEP_COLUMNS)
    assert table["t"].tolist() == [16] * 4 + [32] * 4 + [64] * 4
    assert table["block_m"].tolist()[:4] == [256, 256, 768, 768]
    assert table["n"].tolist()[:2] == [64, 64]
    assert table["m"].tolist()[:2] == [3072, 768]
    feasible = dict(zip(zip(table["t"].tolist(), table["block_m"].tolist()), table["feasible"].tolist()))
    assert feasible[(32, 256)]
    assert not feasible[(32, 768)]
    assert not feasible[(64, 256)]


def test_dse_sweep_matches_single_estimates():
    table = dse_sweep([FFN], [32], [256])
    (row,) = table.records()
    p = estimate_cycles(*FFN)
    assert row["compute_cycles"] == p.compute_cycles
    assert row["total_cycles"] == p.total_cycles_serial
    assert row["gflops"] == pytest.approx(p.gflops_serial)
    assert row["dsp"] == 1024
    assert row["bram_blocks"] == 54
    assert table.units["latency_s"] == ureg.second


def test_dse_sweep_csv():
    buf = io.StringIO()
    dse_sweep([FFN], [16, 32], [256]).write_csv(buf)
    df = pd.read_csv(io.StringIO(buf.getvalue()))
    assert list(df.columns) == list(SWEEP_COLUMNS)
    assert df["compute_cycles"].tolist() == [595_968, 148_992]


def test_dse_sweep_empty_lists():
    with pytest.raises(ValueError):
        dse_sweep([], [32], [256])
    with pytest.raises(ValueError):
        dse_sweep([FFN], [], [256])
    with pytest.raises(ValueError):
        dse_sweep([FFN], [32], [])


def test_mac_counts_of_bench_cases():
    assert estimate_cycles(*BENCH_CASES["attn"]).mac_count == 37_748_736
    assert estimate_cycles(*FFN).mac_count == 150_994_944


def test_serial_throughput_is_bounded_and_monotone_in_bus_width():
    previous = 0.0
    for bus in (4, 8, 16, 32, 64):
        g = estimate_cycles(*FFN, hw=HwParams(bus_bytes_per_cycle=bus)).gflops_serial
        assert 1.0 < g < 204.8
        assert g > previous
        previous = g


def test_partial_tile_overhead_is_small():
    full = estimate_cycles(64, 768, 3072).compute_cycles
    partial = estimate_cycles(63, 767, 3071).compute_cycles
    assert partial <= full
    # per-MAC inflation of the partial shape
    inflation = (partial / (63 * 767 * 3071)) / (full / (64 * 768 * 3072)) - 1
    assert inflation < 0.05


def test_compute_cycles_respect_mac_array_bound():
    for dims in [(1, 1, 1), (7, 33, 65), FFN, (63, 767, 3071)]:
        p = estimate_cycles(*dims)
        assert p.compute_cycles >= -(-p.mac_count // p.macs_per_cycle)
        assert p.gflops_compute <= p.peak_gflops


@pytest.mark.parametrize("dims", [FFN, (63, 767, 3071), (7, 33, 65), (1, 1, 1)])
def test_compute_cycles_non_increasing_in_tile_size(dims):
    cycles = [estimate_cycles(*dims, TileConfig(tile_size=t)).compute_cycles for t in (1, 2, 4, 8, 16, 32, 64, 128)]
    assert all(later <= earlier for earlier, later in zip(cycles, cycles[1:]))


def test_b_load_cycles_ignore_tile_size_and_block_width():
    loads = {
        estimate_cycles(*FFN, TileConfig(tile_size=t, block_m=bm)).b_load_cycles
        for t in (8, 16, 32, 64)
        for bm in (32, 256, 768)
    }
    assert loads == {147_456}


@pytest.mark.parametrize("dims", [(7, 33, 65), (64, 768, 300), (1, 1, 1)])
@pytest.mark.parametrize("bus", [3, 16, 64])
def test_transfer_cycles_cover_engine_traffic(dims, bus):
    n, k, m = dims
    a, b = random_matrix(n, k, seed=1), random_matrix(k, m, seed=2)
    assert isinstance(a, Int8Matrix) and isinstance(b, Int8Matrix)
    state = AcceleratorState()
    tiled_gemm(state, a, b)
    traffic = state.traffic
    p = estimate_cycles(*dims, hw=HwParams(bus_bytes_per_cycle=bus))
    assert p.a_load_cycles * bus >= traffic.a_bytes_read
    assert p.b_load_cycles * bus >= traffic.b_bytes_read
    assert p.c_store_cycles * bus >= traffic.c_bytes_written
    # ceil rounding wastes less than one bus beat per transfer
    assert p.a_load_cycles * bus - traffic.a_bytes_read < bus
