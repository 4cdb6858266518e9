#!/usr/bin/env python3
"""Large-population smoke run: N feeders of M houses under the
coordinator executor, wall time and peak RSS printed.

Usage: python scripts/scale_smoke.py [--feeders 100] [--houses 10000]
                                     [--transport thread|process]

The acceptance-gate version of this lives in tests/test_acceptance.py
(criterion 10); this script lets you size it to your machine.
"""

import argparse
import resource
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from feedersim.coordinator import coordinator_run
from feedersim.engine import SimulationConfig, piecewise_prices, synthetic_weather
from feedersim.population import FeederPlan, lean_population


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--feeders", type=int, default=100)
    parser.add_argument("--houses", type=int, default=10_000)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--transport", choices=("thread", "process"),
                        default="thread")
    args = parser.parse_args()

    pop = lean_population(args.seed)
    sim = SimulationConfig(
        weather=synthetic_weather(100), prices=piecewise_prices(100),
    )
    plans = [FeederPlan(pop, fid, args.houses) for fid in range(args.feeders)]

    total = args.feeders * args.houses
    print(f"{total:,} houses across {args.feeders} feeders "
          f"({args.transport} transport) ...")
    t0 = time.perf_counter()
    result = coordinator_run(plans, sim, transport=args.transport,
                             timeout_s=7200.0)
    wall = time.perf_counter() - t0
    rss_gb = max(
        resource.getrusage(resource.RUSAGE_SELF).ru_maxrss,
        resource.getrusage(resource.RUSAGE_CHILDREN).ru_maxrss,
    ) / 1024 / 1024
    peak = max(result.global_head.values)
    print(f"done in {wall/60:.2f} min, peak RSS {rss_gb:.2f} GB, "
          f"system peak load {peak/1000:.1f} MW "
          f"({peak/total:.2f} kW/house)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
