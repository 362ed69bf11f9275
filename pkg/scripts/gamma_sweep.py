"""E1 and E2 of the steady Hull cell for several augmentation parameters.

Usage: python3 scripts/gamma_sweep.py [gamma ...]
"""
import json
import sys
from pathlib import Path

from osmium.cli import bundled_scenario
from osmium.scenario import load_scenario
from osmium.steady import error_metrics, newton_solve, potential_guess
from osmium.transient import ensure_reference_moles

if __name__ == "__main__":
    gammas = [float(g) for g in sys.argv[1:]] or [1e-3, 1e-2, 1e-1]
    base = json.loads(Path(bundled_scenario("mini_hull_steady")).read_text())
    print(f"{'gamma':>8s} {'its':>4s} {'E1':>14s} {'E2':>10s}")
    for g in gammas:
        setup = load_scenario(dict(base, gamma=g)).build("steady")
        ensure_reference_moles(setup.initial, setup.problem)
        state, rep = newton_solve(potential_guess(setup.initial, setup.problem), setup.problem, setup.newton)
        m = error_metrics(state, setup.problem)
        print(f"{g:8.0e} {rep.iterations:4d} {m['E1']:14.7e} {m['E2']:10.3e}")
