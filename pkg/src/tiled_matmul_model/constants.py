"""
Hardware and design constants of the modeled accelerator
"""

# Dataflow defaults
TILE_SIZE = 32
BLOCK_M = 256
MAX_N = 64  # rows of the persistent A buffer
MAX_K = 768  # cols of the persistent A buffer

# Cycle model defaults
CLOCK_HZ = 100e6
BUS_BYTES_PER_CYCLE = 16  # 128-bit AXI at the PL clock
PIPELINE_FILL = 8

# XCK26 (KV260) programmable-logic totals
DEVICE_NAME = "xck26"
DSP_TOTAL = 1248
BRAM_BLOCKS_TOTAL = 144
LUT_TOTAL = 118800
FF_TOTAL = 237600
BRAM_BLOCK_BYTES = 4608  # 36 Kbit
BRAM_MARGIN = 0.88

ACCUMULATOR_BYTES = 4  # int32 C elements
FLOPS_PER_MAC = 2

QUANT_MAX = 127
# Relative Frobenius error allowed for a dequantized int8 GEMM against float.
QUANTIZED_GEMM_ERROR_BOUND = 0.02

# Benchmark shapes (N, K, M)
BENCH_CASES = {
    "attn": (64, 768, 768),
    "ffn": (64, 768, 3072),
}
