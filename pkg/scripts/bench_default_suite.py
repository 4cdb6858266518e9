#!/usr/bin/env python3
"""Run the full default benchmark suite and emit the report.

Usage: python scripts/bench_default_suite.py [OUT_DIR]

Covers all four experiment kinds at desk scale; takes a few minutes.
Pass --plots via the CLI instead if you want images:
    feedersim bench --suite <file> --out <dir> --plots
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from feedersim.bench import (
    BenchSuiteConfig,
    ExperimentSpec,
    physical_cores,
    run_suite,
)


def default_suite() -> BenchSuiteConfig:
    cores = physical_cores()
    return BenchSuiteConfig((
        ExperimentSpec(
            kind="linear_growth", houses=(1000, 2000, 4000, 8000),
            repetitions=3, population="lean",
        ),
        ExperimentSpec(
            kind="feeder_scaling",
            workers=tuple(k for k in (1, 2, 4) if k <= cores),
            houses_per_feeder=10_000, repetitions=3,
            population="lean", transport="process",
        ),
        ExperimentSpec(
            kind="granularity", workers=(1, 2, 4, 8), houses_total=3000,
            repetitions=5, population="lean", transport="process",
        ),
        ExperimentSpec(
            kind="oversubscription", workers=(cores, 4 * cores),
            houses_total=10_000, repetitions=3,
            population="lean", transport="process",
        ),
    ))


def main() -> int:
    out = sys.argv[1] if len(sys.argv) > 1 else "bench_report"
    rows = run_suite(default_suite(), out)
    print(f"{len(rows)} rows -> {out}/bench.csv")
    print((Path(out) / "summary.txt").read_text(), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
