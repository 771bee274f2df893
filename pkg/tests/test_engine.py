"""
The tiled engine against the naive oracle, the persistent-A protocol and
the traffic counters.
"""

import itertools
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tiled_matmul_model.engine import (
    AcceleratorState,
    TileConfig,
    TrafficReport,
    blocks_for,
    reset,
    tiled_gemm,
)
from tiled_matmul_model.errors import CapacityError, ProtocolError, ShapeError
from tiled_matmul_model.matrix import Int8Matrix, Int32Matrix, naive_gemm, random_matrix


def _pair(n, k, m, seed):
    a = random_matrix(n, k, seed)
    b = random_matrix(k, m, seed + 1)
    assert isinstance(a, Int8Matrix) and isinstance(b, Int8Matrix)
    return a, b


def test_tile_config_defaults_and_validation():
    cfg = TileConfig()
    assert (cfg.tile_size, cfg.block_m, cfg.max_n, cfg.max_k) == (32, 256, 64, 768)
    assert cfg.a_buffer_bytes == 49_152
    assert cfg.b_block_bytes == 196_608
    for bad in ({"tile_size": 0}, {"block_m": -1}, {"max_n": 0}, {"max_k": 0}):
        with pytest.raises(ValueError):
            TileConfig(**bad)


def test_one_by_one_product():
    state = AcceleratorState()
    c = tiled_gemm(state, Int8Matrix([[-128]]), Int8Matrix([[-128]]))
    assert isinstance(c, Int32Matrix)
    assert c.data.tolist() == [[16384]]


@pytest.mark.parametrize("block_m", [32, 256])
@pytest.mark.parametrize("t", [8, 16, 32])
def test_corner_dims_match_oracle(t, block_m):
    # Partial tiles and partial B blocks in every dimension.
    config = TileConfig(tile_size=t, block_m=block_m, max_n=64, max_k=768)
    sizes = [1, t - 1, t, t + 1, 2 * t - 1]
    for n, k, m in itertools.product(sizes, repeat=3):
        a, b = _pair(n, k, m, seed=n * 10_000 + k * 100 + m)
        state = AcceleratorState(config)
        assert tiled_gemm(state, a, b) == naive_gemm(a, b), (n, k, m)


def test_bench_shapes_match_oracle():
    for n, k, m in [(64, 768, 768), (64, 768, 3072)]:
        a, b = _pair(n, k, m, seed=11)
        assert tiled_gemm(AcceleratorState(), a, b) == naive_gemm(a, b)


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(1, 64),
    k=st.integers(1, 100),
    m=st.integers(1, 200),
    t=st.sampled_from([3, 8, 16, 32]),
    block_m=st.sampled_from([7, 32, 256]),
    seed=st.integers(0, 2**31 - 2),
)
def test_tiled_gemm_equals_naive_gemm(n, k, m, t, block_m, seed):
    a, b = _pair(n, k, m, seed)
    state = AcceleratorState(TileConfig(tile_size=t, block_m=block_m))
    assert tiled_gemm(state, a, b, update_a=True) == naive_gemm(a, b)


def test_extreme_operands_are_exact():
    k = 768
    a = Int8Matrix(np.full((64, k), -128, dtype=np.int8))
    b = Int8Matrix(np.full((k, 40), -128, dtype=np.int8))
    c = tiled_gemm(AcceleratorState(), a, b)
    assert (c.data == 128 * 128 * k).all()


def test_capacity_is_checked():
    state = AcceleratorState(TileConfig(max_n=8, max_k=16))
    a, b = _pair(9, 16, 4, seed=1)
    with pytest.raises(CapacityError):
        tiled_gemm(state, a, b)
    a, b = _pair(8, 17, 4, seed=1)
    with pytest.raises(CapacityError):
        tiled_gemm(state, a, b)
    # Exactly at capacity is fine.
    a, b = _pair(8, 16, 4, seed=1)
    assert tiled_gemm(state, a, b) == naive_gemm(a, b)


def test_inner_dim_mismatch():
    a, _ = _pair(4, 8, 4, seed=0)
    b = random_matrix(9, 4, seed=0)
    with pytest.raises(ShapeError):
        tiled_gemm(AcceleratorState(), a, b)


def test_reuse_without_load_is_a_protocol_error():
    b = random_matrix(8, 4, seed=0)
    with pytest.raises(ProtocolError):
        tiled_gemm(AcceleratorState(), None, b, update_a=False)
    with pytest.raises(ProtocolError):
        tiled_gemm(AcceleratorState(), None, b, update_a=True)


def test_reuse_uses_resident_a():
    a, b1 = _pair(20, 40, 50, seed=5)
    b2 = random_matrix(40, 70, seed=99)
    state = AcceleratorState(TileConfig(tile_size=8, block_m=32))
    tiled_gemm(state, a, b1)
    c2 = tiled_gemm(state, None, b2, update_a=False)
    assert c2 == naive_gemm(a, b2)
    assert state.resident_a() == a


def test_reuse_ignores_new_a_and_warns(caplog):
    a, b = _pair(4, 6, 5, seed=2)
    other = random_matrix(4, 6, seed=3)
    state = AcceleratorState()
    tiled_gemm(state, a, b)
    with caplog.at_level(logging.WARNING, logger="tiled_matmul_model.engine"):
        c = tiled_gemm(state, other, b, update_a=False)
    assert c == naive_gemm(a, b)
    assert "ignoring" in caplog.text


def test_reuse_with_wrong_k_is_a_shape_error():
    a, b = _pair(4, 6, 5, seed=2)
    state = AcceleratorState()
    tiled_gemm(state, a, b)
    with pytest.raises(ShapeError):
        tiled_gemm(state, None, random_matrix(7, 5, seed=0), update_a=False)


def test_smaller_a_overwrites_only_its_region():
    state = AcceleratorState(TileConfig(max_n=8, max_k=8))
    big, b_big = _pair(8, 8, 3, seed=4)
    tiled_gemm(state, big, b_big)
    small, b_small = _pair(2, 3, 3, seed=6)
    c = tiled_gemm(state, small, b_small)
    assert c == naive_gemm(small, b_small)
    assert state.loaded_dims == (2, 3)
    buf = state.a_buffer
    assert np.array_equal(buf[:2, :3], small.data)
    assert np.array_equal(buf[2:, :], big.data[2:, :])


def test_failed_call_leaves_state_untouched():
    state = AcceleratorState(TileConfig(max_n=8, max_k=8))
    a, b = _pair(4, 4, 4, seed=0)
    tiled_gemm(state, a, b)
    before = (state.loaded_dims, state.traffic, state.a_buffer_checksum())
    big, b_big = _pair(9, 4, 4, seed=1)
    with pytest.raises(CapacityError):
        tiled_gemm(state, big, b_big)
    assert (state.loaded_dims, state.traffic, state.a_buffer_checksum()) == before


def test_a_buffer_view_is_read_only():
    state = AcceleratorState()
    with pytest.raises(ValueError):
        state.a_buffer[0, 0] = 1


def test_traffic_counters_single_call():
    a, b = _pair(64, 768, 768, seed=0)
    state = AcceleratorState()
    tiled_gemm(state, a, b)
    assert state.traffic == TrafficReport(
        a_bytes_read=49_152,
        b_bytes_read=589_824,
        c_bytes_written=196_608,
        a_loads=1,
        b_blocks_streamed=3,
    )
    assert state.traffic.total_bytes == 49_152 + 589_824 + 196_608


def test_traffic_counters_shared_a():
    a, b = _pair(64, 768, 768, seed=0)
    state = AcceleratorState()
    tiled_gemm(state, a, b)
    tiled_gemm(state, None, b, update_a=False)
    tiled_gemm(state, None, b, update_a=False)
    assert state.traffic.a_bytes_read == 49_152
    assert state.traffic.a_loads == 1
    assert state.traffic.b_bytes_read == 3 * 589_824
    assert state.traffic.b_blocks_streamed == 9


def test_reset_clears_resident_a_and_counters():
    a, b = _pair(4, 4, 4, seed=0)
    state = AcceleratorState()
    tiled_gemm(state, a, b)
    reset(state)
    assert state.loaded_dims is None
    assert state.traffic == TrafficReport()
    with pytest.raises(ProtocolError):
        state.resident_a()


def test_traffic_report_arithmetic():
    x = TrafficReport(1, 2, 3, 1, 1)
    y = TrafficReport(10, 20, 30, 0, 2)
    assert (x + y) - x == y
    assert (x + y).total_bytes == 66


def test_blocks_for():
    assert blocks_for(768, 256) == 3
    assert blocks_for(769, 256) == 4
    assert blocks_for(1, 256) == 1


@pytest.mark.parametrize(
    ("t", "block_m"),
    [(1, 32), (8, 512), (64, 32), (64, 256), (64, 512)],
)
def test_extreme_tile_configs_match_oracle(t, block_m):
    n, k, m = (5, 9, 70) if t == 1 else (64, 130, 600)
    a, b = _pair(n, k, m, seed=t * 1000 + block_m)
    state = AcceleratorState(TileConfig(tile_size=t, block_m=block_m))
    assert tiled_gemm(state, a, b) == naive_gemm(a, b)


def test_partial_tiles_on_every_edge():
    a, b = _pair(7, 33, 65, seed=7)
    assert tiled_gemm(AcceleratorState(), a, b) == naive_gemm(a, b)


def test_reuse_never_touches_a_buffer():
    a, b = _pair(64, 768, 768, seed=7)
    b2 = random_matrix(768, 3072, seed=9)
    state = AcceleratorState()
    tiled_gemm(state, a, b)
    checksum = state.a_buffer_checksum()
    c2 = tiled_gemm(state, None, b2, update_a=False)
    assert state.a_buffer_checksum() == checksum
    assert c2 == naive_gemm(a, b2)
    assert state.traffic.a_loads == 1
    assert state.traffic.a_bytes_read == 49_152


def test_reset_is_idempotent_and_restores_fresh_behaviour():
    a, b = _pair(12, 40, 90, seed=3)
    fresh = AcceleratorState()
    expected = tiled_gemm(fresh, a, b)

    state = AcceleratorState()
    tiled_gemm(state, *_pair(30, 50, 20, seed=4))
    reset(state)
    reset(state)
    with pytest.raises(ProtocolError):
        tiled_gemm(state, None, b, update_a=False)
    assert tiled_gemm(state, a, b) == expected
    assert state.traffic == fresh.traffic
