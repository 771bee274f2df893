"""
Command-line interface: ``tiled-mm {gemm,verify,bench,dse,traffic,attn-demo}``

Reports go to stdout (JSON by default, ``--csv`` for the tabular commands);
logs go to stderr. Exit codes: 0 success, 1 runtime or verification failure,
2 usage error, 3 internal invariant breach.
"""

import argparse
import csv
import io
import logging
import statistics
import sys
import time
from collections.abc import Callable, Sequence
from pathlib import Path

import numpy as np
from rich.console import Console
from rich.logging import RichHandler

from tiled_matmul_model import engine
from tiled_matmul_model.attention import QuantizedLinear, float_linear, project_shared
from tiled_matmul_model.constants import (
    BENCH_CASES,
    BLOCK_M,
    BRAM_MARGIN,
    BUS_BYTES_PER_CYCLE,
    CLOCK_HZ,
    MAX_K,
    MAX_N,
    PIPELINE_FILL,
    QUANTIZED_GEMM_ERROR_BOUND,
    TILE_SIZE,
)
from tiled_matmul_model.engine import AcceleratorState, TileConfig
from tiled_matmul_model.errors import InvariantViolation, TiledMatmulError
from tiled_matmul_model.matrix import (
    F32Matrix,
    Int8Matrix,
    Int32Matrix,
    MatrixDtype,
    naive_gemm,
    random_matrix,
    read_matrix,
    relative_frobenius_error,
    write_matrix,
)
from tiled_matmul_model.perf import (
    SWEEP_COLUMNS,
    DeviceProfile,
    HwParams,
    dse_sweep,
    estimate_cycles,
    estimate_resources,
    roofline_gflops,
)
from tiled_matmul_model.report import (
    AttentionReport,
    BenchReport,
    Dims,
    ProjectionResult,
    Report,
    RunReport,
    SweepReport,
    SweepRow,
    TrafficRow,
    TrafficTableReport,
    TrialResult,
    VerifyReport,
    format_checksum,
)
from tiled_matmul_model.traffic import (
    DataflowKind,
    a_traffic_ratio,
    arithmetic_intensity,
    reuse_factor,
    traffic_for,
)
from tiled_matmul_model.units import parse_frequency

log = logging.getLogger("tiled_matmul_model")

TABULAR_COMMANDS = frozenset({"dse", "traffic"})
VERIFY_T_CHOICES = (8, 16, 32)
VERIFY_BLOCK_M_CHOICES = (32, 256)
VERIFY_M_MAX = 3072


# ---- Flag parsing ----


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from err
    if value < 1:
        raise argparse.ArgumentTypeError(f"{value} must be at least 1")
    return value


def _int_list(text: str) -> list[int]:
    items = [s.strip() for s in text.split(",") if s.strip()]
    if not items:
        raise argparse.ArgumentTypeError("list must not be empty")
    return [_positive_int(s) for s in items]


def _dims(text: str) -> tuple[int, int, int]:
    parts = text.lower().split("x")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"dims {text!r} must look like NxKxM")
    n, k, m = (_positive_int(p) for p in parts)
    return n, k, m


def _dims_list(text: str) -> list[tuple[int, int, int]]:
    items = [s.strip() for s in text.split(",") if s.strip()]
    if not items:
        raise argparse.ArgumentTypeError("dims list must not be empty")
    return [_dims(s) for s in items]


def _frequency(text: str) -> float:
    try:
        return parse_frequency(text)
    except ValueError as err:
        raise argparse.ArgumentTypeError(str(err)) from err


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--t", type=_int_list, default=None, help=f"tile size(s) T (default {TILE_SIZE})")
    common.add_argument("--block-m", type=_int_list, default=None, help=f"B block width(s) (default {BLOCK_M})")
    common.add_argument("--max-n", type=_positive_int, default=MAX_N, help="persistent A rows")
    common.add_argument("--max-k", type=_positive_int, default=MAX_K, help="persistent A cols")
    common.add_argument(
        "--clock-hz", type=_frequency, default=CLOCK_HZ, help='PL clock, e.g. 1e8 or "100 MHz"'
    )
    common.add_argument("--bus-bytes", type=_positive_int, default=BUS_BYTES_PER_CYCLE, help="bytes per cycle")
    common.add_argument("--fill", type=int, default=PIPELINE_FILL, help="pipeline fill cycles per tile")
    common.add_argument("--seed", type=int, default=0)
    fmt = common.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="fmt", action="store_const", const="json", default="json")
    fmt.add_argument("--csv", dest="fmt", action="store_const", const="csv")
    common.add_argument("--out", type=Path, default=None, help="output file")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="errors only")
    return common


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="tiled-mm", description="Functional and analytic model of a tiled int8 GEMM accelerator"
    )
    sub = p.add_subparsers(dest="cmd", required=True)
    common = _common_flags()

    pg = sub.add_parser("gemm", parents=[common], help="run one GEMM through the tiled engine")
    pg.add_argument("--n", type=_positive_int, default=64)
    pg.add_argument("--k", type=_positive_int, default=768)
    pg.add_argument("--m", type=_positive_int, default=768)
    pg.add_argument("--a", type=Path, default=None, help="int8 A matrix file (TMM1)")
    pg.add_argument("--b", type=Path, default=None, help="int8 B matrix file (TMM1)")
    pg.add_argument("--check", action="store_true", help="compare against the naive oracle")

    pv = sub.add_parser("verify", parents=[common], help="randomized oracle-equivalence trials")
    pv.add_argument("--trials", type=int, default=50)
    pv.add_argument("--n-max", type=_positive_int, default=None)
    pv.add_argument("--k-max", type=_positive_int, default=None)
    pv.add_argument("--m-max", type=_positive_int, default=VERIFY_M_MAX)

    pb = sub.add_parser("bench", parents=[common], help="benchmark a transformer-shaped case")
    pb.add_argument("--case", choices=sorted(BENCH_CASES), default="ffn")
    pb.add_argument("--trials", type=int, default=1)

    pd = sub.add_parser("dse", parents=[common], help="sweep tile sizes and block widths")
    pd.add_argument("--dims", type=_dims_list, default=[BENCH_CASES["ffn"]], help="NxKxM[,NxKxM...]")
    pd.add_argument("--bram-margin", type=float, default=BRAM_MARGIN)

    pt = sub.add_parser("traffic", parents=[common], help="compare dataflow memory traffic")
    pt.add_argument("--n", type=_positive_int, default=64)
    pt.add_argument("--k", type=_positive_int, default=768)
    pt.add_argument("--m", type=_positive_int, default=768)
    pt.add_argument("--calls", type=_positive_int, default=1, help="calls sharing one A")

    pa = sub.add_parser("attn-demo", parents=[common], help="quantized Q/K/V projections")
    pa.add_argument("--seq", type=_positive_int, default=64)
    pa.add_argument("--hidden", type=_positive_int, default=768)
    pa.add_argument("--out-features", type=_positive_int, default=768)
    return p


def _single(p: argparse.ArgumentParser, values: list[int] | None, flag: str, default: int) -> int:
    if values is None:
        return default
    if len(values) != 1:
        p.error(f"{flag} takes a single value for this command")
    return values[0]


def _config(p: argparse.ArgumentParser, args: argparse.Namespace) -> TileConfig:
    return TileConfig(
        tile_size=_single(p, args.t, "--t", TILE_SIZE),
        block_m=_single(p, args.block_m, "--block-m", BLOCK_M),
        max_n=args.max_n,
        max_k=args.max_k,
    )


def _hw(p: argparse.ArgumentParser, args: argparse.Namespace) -> HwParams:
    try:
        return HwParams(clock_hz=args.clock_hz, bus_bytes_per_cycle=args.bus_bytes, pipeline_fill=args.fill)
    except ValueError as err:
        p.error(str(err))


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.DEBUG if args.verbose else logging.ERROR if args.quiet else logging.WARNING
    handler = RichHandler(console=Console(stderr=True), show_path=False, show_time=False)
    logging.basicConfig(level=level, format="%(message)s", handlers=[handler], force=True)


def _timed(fn: Callable[[], Int32Matrix]) -> tuple[Int32Matrix, float]:
    start = time.perf_counter()
    result = fn()
    return result, time.perf_counter() - start


def _check_traffic(state: AcceleratorState, n: int, k: int, m: int) -> None:
    """Instrumented traffic of one fresh call must equal the closed-form model."""
    expected = traffic_for(DataflowKind.persistent_tiled, n, k, m, 1, block_m=state.config.block_m)
    if state.traffic != expected:
        raise InvariantViolation(f"engine traffic {state.traffic} != modeled {expected}")


# ---- Commands ----

Outcome = tuple[Report, int]


def cmd_gemm(p: argparse.ArgumentParser, args: argparse.Namespace) -> Outcome:
    config = _config(p, args)
    hw = _hw(p, args)
    if (args.a is None) != (args.b is None):
        p.error("--a and --b must be given together")
    if args.a is not None:
        a, b = read_matrix(args.a), read_matrix(args.b)
        if not isinstance(a, Int8Matrix) or not isinstance(b, Int8Matrix):
            raise TiledMatmulError("gemm operands must be int8 matrix files")
    else:
        a = random_matrix(args.n, args.k, args.seed, MatrixDtype.int8)
        b = random_matrix(args.k, args.m, args.seed + 1, MatrixDtype.int8)
    assert isinstance(a, Int8Matrix) and isinstance(b, Int8Matrix)

    state = AcceleratorState(config)
    c, wall = _timed(lambda: engine.tiled_gemm(state, a, b, update_a=True))
    n, k, m = a.rows, a.cols, b.cols
    _check_traffic(state, n, k, m)

    passed = None
    if args.check:
        passed = c == naive_gemm(a, b)
        if not passed:
            log.error("tiled result differs from the naive oracle")
    if args.out is not None:
        write_matrix(args.out, c)

    report = RunReport(
        command=["gemm", *args.argv],
        dims=Dims(n=n, k=k, m=m),
        config=config,
        hw=hw,
        wall_time_seconds=wall,
        checksum=format_checksum(c.checksum()),
        perf=estimate_cycles(n, k, m, config, hw),
        traffic=state.traffic,
        passed=passed,
        output_path=None if args.out is None else str(args.out),
    )
    return report, 1 if passed is False else 0


def _corner_values(t: int, limit: int) -> list[int]:
    values = {v for v in (1, t - 1, t, t + 1, 2 * t - 1) if 1 <= v <= limit}
    return sorted(values) or [limit]


def cmd_verify(p: argparse.ArgumentParser, args: argparse.Namespace) -> Outcome:
    if args.trials < 1:
        p.error(f"--trials={args.trials} must be at least 1")
    n_max = args.n_max or args.max_n
    k_max = args.k_max or args.max_k
    if n_max > args.max_n or k_max > args.max_k:
        p.error(f"--n-max/--k-max exceed the A buffer capacity {args.max_n}x{args.max_k}")
    ts = args.t or list(VERIFY_T_CHOICES)
    bms = args.block_m or list(VERIFY_BLOCK_M_CHOICES)

    rng = np.random.default_rng(args.seed)
    trials: list[TrialResult] = []
    first_failure = None
    start = time.perf_counter()
    for i in range(args.trials):
        t = int(rng.choice(ts))
        bm = int(rng.choice(bms))
        seed = int(rng.integers(0, 2**31 - 1))
        if i % 4 == 3:
            n = int(rng.choice(_corner_values(t, n_max)))
            k = int(rng.choice(_corner_values(t, k_max)))
            m = int(rng.choice(_corner_values(t, args.m_max)))
        else:
            n = int(rng.integers(1, n_max, endpoint=True))
            k = int(rng.integers(1, k_max, endpoint=True))
            m = int(rng.integers(1, args.m_max, endpoint=True))
        a = random_matrix(n, k, seed, MatrixDtype.int8)
        b = random_matrix(k, m, seed + 1, MatrixDtype.int8)
        assert isinstance(a, Int8Matrix) and isinstance(b, Int8Matrix)
        state = AcceleratorState(TileConfig(tile_size=t, block_m=bm, max_n=args.max_n, max_k=args.max_k))
        c = engine.tiled_gemm(state, a, b, update_a=True)
        ok = c == naive_gemm(a, b)
        result = TrialResult(
            index=i, seed=seed, n=n, k=k, m=m, tile_size=t, block_m=bm, passed=ok,
            checksum=format_checksum(c.checksum()),
        )
        trials.append(result)
        log.debug("trial %d: %dx%dx%d T=%d block_m=%d %s", i, n, k, m, t, bm, "ok" if ok else "MISMATCH")
        if not ok:
            first_failure = result
            log.error("mismatch at trial %d: dims (%d, %d, %d), seed %d", i, n, k, m, seed)
            break

    report = VerifyReport(
        command=["verify", *args.argv],
        trials=trials,
        passed=first_failure is None,
        first_failure=first_failure,
        wall_time_seconds=time.perf_counter() - start,
    )
    return report, 0 if first_failure is None else 1


def cmd_bench(p: argparse.ArgumentParser, args: argparse.Namespace) -> Outcome:
    if args.trials < 1:
        p.error(f"--trials={args.trials} must be at least 1")
    config = _config(p, args)
    hw = _hw(p, args)
    n, k, m = BENCH_CASES[args.case]
    a = random_matrix(n, k, args.seed, MatrixDtype.int8)
    b = random_matrix(k, m, args.seed + 1, MatrixDtype.int8)
    assert isinstance(a, Int8Matrix) and isinstance(b, Int8Matrix)

    walls = []
    c = None
    state = AcceleratorState(config)
    for _ in range(args.trials):
        state = AcceleratorState(config)
        c, wall = _timed(lambda state=state: engine.tiled_gemm(state, a, b, update_a=True))
        walls.append(wall)
    assert c is not None
    _check_traffic(state, n, k, m)

    intensity = arithmetic_intensity(DataflowKind.persistent_tiled, n, k, m)
    report = BenchReport(
        command=["bench", *args.argv],
        case=args.case,
        dims=Dims(n=n, k=k, m=m),
        config=config,
        hw=hw,
        wall_time_seconds=statistics.median(walls),
        wall_time_trials_seconds=walls,
        checksum=format_checksum(c.checksum()),
        perf=estimate_cycles(n, k, m, config, hw),
        traffic=state.traffic,
        resources=estimate_resources(config),
        arithmetic_intensity=intensity,
        roofline_gflops=roofline_gflops(intensity, config, hw),
    )
    return report, 0


def cmd_dse(p: argparse.ArgumentParser, args: argparse.Namespace) -> Outcome:
    hw = _hw(p, args)
    if not 0 < args.bram_margin <= 1:
        p.error(f"--bram-margin={args.bram_margin} must be in (0, 1]")
    table = dse_sweep(
        args.dims,
        args.t or [16, 32, 64],
        args.block_m or [BLOCK_M],
        hw,
        DeviceProfile(),
        base=TileConfig(max_n=args.max_n, max_k=args.max_k),
        bram_margin=args.bram_margin,
    )
    report = SweepReport(
        command=["dse", *args.argv],
        hw=hw,
        bram_margin=args.bram_margin,
        rows=[SweepRow(**r) for r in table.records()],
    )
    return report, 0


def cmd_traffic(p: argparse.ArgumentParser, args: argparse.Namespace) -> Outcome:
    block_m = _single(p, args.block_m, "--block-m", BLOCK_M)
    n, k, m, calls = args.n, args.k, args.m, args.calls
    rows = []
    for kind in DataflowKind:
        tr = traffic_for(kind, n, k, m, calls, block_m=block_m)
        rows.append(
            TrafficRow(
                kind=kind.name,
                n=n,
                k=k,
                m=m,
                calls=calls,
                a_bytes=tr.a_bytes_read,
                b_bytes=tr.b_bytes_read,
                c_bytes=tr.c_bytes_written,
                total_bytes=tr.total_bytes,
                reuse_factor=reuse_factor(kind, n, k, m, calls),
                arithmetic_intensity=arithmetic_intensity(kind, n, k, m, calls),
            )
        )
    report = TrafficTableReport(
        command=["traffic", *args.argv],
        rows=rows,
        a_traffic_ratio=a_traffic_ratio(n, k, m, calls),
    )
    return report, 0


def cmd_attn_demo(p: argparse.ArgumentParser, args: argparse.Namespace) -> Outcome:
    config = _config(p, args)
    seq, hidden, out = args.seq, args.hidden, args.out_features
    x = random_matrix(seq, hidden, args.seed, MatrixDtype.f32)
    assert isinstance(x, F32Matrix)
    weights, biases, layers = [], [], []
    for i in range(3):
        w = random_matrix(hidden, out, args.seed + 1 + i, MatrixDtype.f32)
        bias = random_matrix(1, out, args.seed + 4 + i, MatrixDtype.f32)
        assert isinstance(w, F32Matrix) and isinstance(bias, F32Matrix)
        weights.append(w)
        biases.append(bias)
        layers.append(QuantizedLinear.from_float(w, bias))

    state = AcceleratorState(config)
    start = time.perf_counter()
    outputs, delta = project_shared(x, layers, state)
    wall = time.perf_counter() - start

    projections = []
    for name, layer, w, bias, y in zip("qkv", layers, weights, biases, outputs, strict=True):
        exact = y == layer.forward_reference(x)
        if not exact:
            raise InvariantViolation(f"{name} projection differs from the naive-oracle pipeline")
        projections.append(
            ProjectionResult(
                name=name,
                rows=y.rows,
                cols=y.cols,
                relative_error=relative_frobenius_error(y.data, float_linear(x, w, bias)),
                bit_exact=exact,
                checksum=format_checksum(y.checksum()),
            )
        )
    worst = max(pr.relative_error for pr in projections)
    report = AttentionReport(
        command=["attn-demo", *args.argv],
        seq=seq,
        hidden=hidden,
        out_features=out,
        seed=args.seed,
        config=config,
        projections=projections,
        max_relative_error=worst,
        error_bound=QUANTIZED_GEMM_ERROR_BOUND,
        within_bound=worst < QUANTIZED_GEMM_ERROR_BOUND,
        a_loads=delta.a_loads,
        a_bytes_read=delta.a_bytes_read,
        traffic=delta,
        wall_time_seconds=wall,
    )
    return report, 0


COMMANDS: dict[str, Callable[[argparse.ArgumentParser, argparse.Namespace], Outcome]] = {
    "gemm": cmd_gemm,
    "verify": cmd_verify,
    "bench": cmd_bench,
    "dse": cmd_dse,
    "traffic": cmd_traffic,
    "attn-demo": cmd_attn_demo,
}


def _csv_text(report: Report) -> str:
    rows = [row.model_dump() for row in getattr(report, "rows")]
    buf = io.StringIO()
    if isinstance(report, SweepReport):
        fields = list(SWEEP_COLUMNS)
    else:
        fields = list(TrafficRow.model_fields)
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _emit(args: argparse.Namespace, report: Report) -> None:
    text = _csv_text(report) if args.fmt == "csv" else report.to_json()
    if args.out is not None and args.cmd in TABULAR_COMMANDS:
        args.out.write_text(text, encoding="utf-8")
        log.info("wrote report to %s", args.out)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def main(argv: Sequence[str] | None = None) -> int:
    p = _build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = p.parse_args(argv)
    args.argv = argv[1:]
    _configure_logging(args)
    if args.fmt == "csv" and args.cmd not in TABULAR_COMMANDS:
        p.error(f"--csv is only supported by: {', '.join(sorted(TABULAR_COMMANDS))}")

    try:
        report, code = COMMANDS[args.cmd](p, args)
        _emit(args, report)
    except InvariantViolation as err:
        log.error("internal invariant violated: %s", err)
        return 3
    except (TiledMatmulError, OSError, ValueError) as err:
        log.error("%s", err)
        return 1
    return code


if __name__ == "__main__":
    raise SystemExit(main())
