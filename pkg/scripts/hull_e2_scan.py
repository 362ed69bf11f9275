"""One-step E2 of the Hull cell against mesh resolution, grading and transport coefficients.

E2 = ||1 - nu_Z . x_nu|| measures the spatial discretization error of the
composition. Each row runs a single RadauIIA step of the bundled
``mini_hull_transient`` scenario with the given changes.

Usage: python3 scripts/hull_e2_scan.py [nx:ny:grading[:D_solvent_ion:D_ion_ion]] ...
"""
import json
import sys
import time
from pathlib import Path

from osmium.cli import bundled_scenario
from osmium.scenario import load_scenario
from osmium.transient import run

DEFAULT = ["14:14:1.5", "20:20:1.5", "14:14:1.5:1e-9:2e-12", "14:14:1.5:2e-9:1e-12"]


def one_step(nx, ny, grading, d_si=None, d_ii=None):
    cfg = json.loads(Path(bundled_scenario("mini_hull_transient")).read_text())
    cfg["time"]["steps"] = 1
    cfg["geometry"].update(nx=nx, ny=ny, grading=grading)
    if d_si is not None:
        D = cfg["material"]["diffusivity"]["D"]
        D[0][1] = D[1][0] = D[0][2] = D[2][0] = d_si
        D[1][2] = D[2][1] = d_ii
    setup = load_scenario(cfg).build("transient")
    _, rep = run(setup.initial, setup.stepper, setup.problem)
    return setup.problem.setup.mesh.n_cells, rep.rows[1].iterations, rep.max_E2


if __name__ == "__main__":
    print(f"{'case':>24s} {'cells':>6s} {'its':>4s} {'E2':>10s} {'time_s':>7s}")
    for spec in sys.argv[1:] or DEFAULT:
        parts = spec.split(":")
        args = [int(parts[0]), int(parts[1]), float(parts[2])] + [float(p) for p in parts[3:5]]
        t0 = time.perf_counter()
        cells, its, e2 = one_step(*args)
        print(f"{spec:>24s} {cells:6d} {its:4d} {e2:10.3e} {time.perf_counter() - t0:7.1f}")
