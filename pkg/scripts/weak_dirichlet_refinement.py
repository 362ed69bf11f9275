"""Boundary mismatch of the weakly imposed compositions under mesh refinement.

Also prints the size of the neglected pressure term relative to the
retained boundary terms.

Usage: python3 scripts/weak_dirichlet_refinement.py
"""
import json
from pathlib import Path

from osmium.cli import bundled_scenario
from osmium.scenario import load_scenario
from osmium.steady import error_metrics, newton_solve, potential_guess, weak_dirichlet_report
from osmium.transient import ensure_reference_moles

LEVELS = [(16, 3), (24, 4), (32, 6), (48, 8)]

if __name__ == "__main__":
    base = json.loads(Path(bundled_scenario("weak_dirichlet_annulus")).read_text())
    for n_theta, n_r in LEVELS:
        cfg = json.loads(json.dumps(base))
        cfg["geometry"].update(n_theta=n_theta, n_r=n_r)
        setup = load_scenario(cfg).build("steady")
        ensure_reference_moles(setup.initial, setup.problem)
        state, rep = newton_solve(potential_guess(setup.initial, setup.problem), setup.problem, setup.newton)
        m = error_metrics(state, setup.problem)
        print(f"n_theta={n_theta:3d} n_r={n_r:2d} cells={setup.problem.setup.mesh.n_cells:5d} "
              f"its={rep.iterations} E1={m['E1']:.3e} E2={m['E2']:.3e}")
        for r in weak_dirichlet_report(state, setup.problem):
            print(f"    {r['tag']:>6s} salt {r['salt']}: boundary error {r['boundary_error']:.3e}, "
                  f"pressure term ratio {r['pressure_ratio']:.1e}")
