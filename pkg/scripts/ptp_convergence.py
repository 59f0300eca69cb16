#!/usr/bin/env python3
"""Clock-sync convergence experiment.

Runs one quiet tile for a few simulated seconds with seeded oscillator
drift and prints, per slave, the servo's recent offset estimates and the
worst true divergence from the grandmaster after the convergence horizon.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from tasnic.engine import TICKS_PER_S
from tasnic.harness import run_scenario
from tasnic.scenario import parse_scenario


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seconds", type=int, default=10)
    parser.add_argument("--max-drift-ppm", type=float, default=10.0)
    parser.add_argument("--interval-ms", type=int, default=250)
    parser.add_argument("--seed", type=int, default=11)
    args = parser.parse_args()

    doc = {
        "grid": {"G_r": 1, "G_c": 1},
        "ptp": {"interval_ms": args.interval_ms,
                "drift_ppm": {"seeded_max_ppm": args.max_drift_ppm}},
        "flows": [],
        "duration_ns": args.seconds * TICKS_PER_S,
        "seed": args.seed,
    }
    scenario = parse_scenario(doc)
    result = run_scenario(scenario)
    net = result.network

    print(f"grandmaster: {net.ptp.grandmaster}")
    print(f"{'slave':>10} {'drift_ppm':>10} {'rounds':>7} "
          f"{'last estimates (ns)':>22} {'worst offset (ns)':>18}")
    for slave, state in sorted(net.ptp.slaves.items()):
        drift = net.nodes[slave].clock.drift_ppm
        recent = [est for _, est in state.estimates[-4:]]
        worst = result.ptp_offsets[slave].max_abs_offset_ns
        print(f"{str(slave):>10} {drift:>10.2f} {state.rounds_completed:>7} "
              f"{str(recent):>22} {worst:>18.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
