"""Run the desk-scale Hull cell and print the per-step table.

Usage: python3 scripts/run_mini_hull.py [--steps N] [--out DIR]
"""
import argparse
import json
import sys

from osmium.cli import main

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=None, help="override the number of time steps")
    ap.add_argument("--out", default="runs/mini_hull")
    args = ap.parse_args()
    scenario = "mini_hull_transient"
    if args.steps is not None:
        from pathlib import Path

        from osmium.cli import bundled_scenario

        cfg = json.loads(Path(bundled_scenario(scenario)).read_text())
        cfg["time"]["steps"] = args.steps
        Path(args.out).mkdir(parents=True, exist_ok=True)
        scenario = str(Path(args.out) / "mini_hull_transient.scn")
        Path(scenario).write_text(json.dumps(cfg, indent=2))
    code = main(["transient", "--scenario", scenario, "--out", args.out])
    if code == 0:
        print(open(f"{args.out}/transient.csv").read())
    sys.exit(code)
