#!/usr/bin/env python3
"""Bandwidth-partition experiment.

Two backlogged flows leave the west single node for the east single node
across the central tile: priority 2 on a queue holding 90% of a 100 us
window, priority 0 riding the leftover round-robin time.  With the host
injection budget at 2.25 Gbps the high-priority flow should land near
2.0 Gbps, i.e. ~90% of the combined goodput.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from tasnic.harness import emit_report, run_scenario
from tasnic.scenario import parse_scenario


def scenario_doc(duration_ms: int, slot_us: int, seed: int) -> dict:
    return {
        "grid": {"preset": "tile_plus_two"},
        "ptp": {"drift_ppm": {"seeded_max_ppm": 10}},
        "schedules": [{"node": "0.0.1.1", "port": "external", "window_us": 100,
                       "entries": [[2, slot_us]]}],
        "flows": [
            {"src": "0.0.1.1", "dst": "0.2.0.0", "pcp": 2, "backlogged": True},
            {"src": "0.0.1.1", "dst": "0.2.0.0", "pcp": 0, "backlogged": True},
        ],
        "duration_ns": duration_ms * 1_000_000,
        "seed": seed,
    }


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--duration-ms", type=int, default=200)
    parser.add_argument("--slot-us", type=int, default=90)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--out", default=None, help="also write a JSON report here")
    args = parser.parse_args()

    scenario = parse_scenario(scenario_doc(args.duration_ms, args.slot_us, args.seed))
    result = run_scenario(scenario)
    report = result.report()

    print(f"{'flow':>4} {'pcp':>3} {'goodput_gbps':>12} {'delivered':>9} {'drops':>6}")
    combined = 0.0
    for flow in report["flows"]:
        combined += flow["goodput_bps"]
        print(f"{flow['flow_id']:>4} {flow['pcp']:>3} "
              f"{flow['goodput_bps']/1e9:>12.4f} {flow['delivered_messages']:>9} "
              f"{flow['dropped_frames']:>6}")
    hi = report["flows"][0]["goodput_bps"]
    print(f"\nhigh-priority share of combined goodput: {hi/combined:.4f}"
          f"  (slot fraction {args.slot_us/100:.2f})")
    if args.out:
        for path in emit_report(result, "json", args.out):
            print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
