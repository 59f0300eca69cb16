#!/usr/bin/env python3
"""Scheduler-share sweep.

Programs random slot tables over 2..4 queues on a single link with every
queue backlogged and no host cap, then compares each queue's measured
share of the link against its slot fraction of the window.
"""

import argparse
import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from tasnic.harness import run_scenario
from tasnic.scenario import parse_scenario

LINK_RATE = 10_000_000_000


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--cases", type=int, default=5)
    parser.add_argument("--window-us", type=int, default=250)
    parser.add_argument("--windows", type=int, default=120)
    args = parser.parse_args()

    window = args.window_us
    print(f"{'case':>4} {'queue':>5} {'slot_us':>7} {'target':>8} {'measured':>9} {'error':>8}")
    worst = 0.0
    for case in range(args.cases):
        rng = random.Random(case)
        count = rng.randint(2, 4)
        queues = rng.sample(range(4), count)
        slots = [rng.randint(30, 55) for _ in range(count)]
        doc = {
            "grid": {"G_r": 1, "G_c": 1},
            "host": {"injection_cap_bps": None},
            "ptp": {"enabled": False},
            "nic": {"time_aware_queues": [0, 1, 2, 3]},
            "priority_map": {"num_classes": 4, "prio_to_tc": [0, 1, 2, 3],
                             "tc_to_queue": [0, 1, 2, 3]},
            "schedules": [{"node": "0.0.0.0", "port": "intra_h",
                           "window_us": window,
                           "entries": [[q, s] for q, s in zip(queues, slots)]}],
            "flows": [{"src": "0.0.0.0", "dst": "0.0.0.1", "pcp": q,
                       "backlogged": True} for q in queues],
            "duration_ns": args.windows * window * 1000,
            "seed": case,
        }
        report = run_scenario(parse_scenario(doc)).report()
        for flow, slot in zip(report["flows"], slots):
            measured = flow["goodput_bps"] * 1522 / 1482 / LINK_RATE
            target = slot / window
            err = measured - target
            worst = max(worst, abs(err))
            print(f"{case:>4} {flow['pcp']:>5} {slot:>7} {target:>8.4f} "
                  f"{measured:>9.4f} {err:>+8.4f}")
    print(f"\nworst absolute share error: {worst:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
