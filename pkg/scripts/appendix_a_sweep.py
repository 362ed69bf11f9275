"""Composition variance of the linear-EOS toy mixture for several slopes B.

With both species' moles conserved a uniform start cannot evolve; with one
conservation law and a source the composition mixes.

Usage: python3 scripts/appendix_a_sweep.py [--A 2.0] [--steps 100]
"""
import argparse

import numpy as np

from osmium.verify import appendix_a_evolution

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--A", type=float, default=2.0)
    ap.add_argument("--steps", type=int, default=100)
    args = ap.parse_args()
    print(f"{'B':>6s} {'var(both)':>11s} {'solved':>7s} {'var(one, perturbed)':>20s}")
    for B in np.linspace(-0.5 * args.A, args.A, 7):
        both = appendix_a_evolution(args.A, B, steps=args.steps, constraints=2)
        one = appendix_a_evolution(args.A, B, steps=args.steps, constraints=1, perturbation=1.0)
        print(f"{B:6.2f} {both.max_variance:11.3e} {str(both.solved):>7s} {one.max_variance:20.3e}")
