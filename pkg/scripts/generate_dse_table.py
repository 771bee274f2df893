import json
from pathlib import Path

import pandas as pd

from tiled_matmul_model.constants import BENCH_CASES
from tiled_matmul_model.perf import dse_sweep
from tiled_matmul_model.report import json_schemas

DOCS = Path(__file__).resolve().parent.parent / "docs"

table = dse_sweep(list(BENCH_CASES.values()), [16, 32, 64], [256, 768])

df = pd.DataFrame(table.records())
df["latency_s"] = df["latency_s"] * 1e3
df = df.rename(columns={"latency_s": "latency (ms)", "gflops": "GFLOP/s"})

table_md = df.to_markdown(index=False, floatfmt=".3f")

# Full markdown page content
markdown = f"""# Design Space

Serial-latency estimates for the bench shapes on the default xck26 profile
at 100 MHz, 16 bytes/cycle. `feasible` applies the 88% BRAM margin.

{table_md}
"""

with open(DOCS / "design_space.md", "w", encoding="utf-8") as f:
    f.write(markdown)

with open(DOCS / "report_schemas.json", "w", encoding="utf-8") as f:
    json.dump(json_schemas(), f, indent=2)
    f.write("\n")
