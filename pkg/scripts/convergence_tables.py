"""Manufactured-solution error tables for the diffusion and Stokes cases.

Usage: python3 scripts/convergence_tables.py [--levels 3] [--base 4]
"""
import argparse

from osmium.manufactured import FIELDS, convergence_study

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, default=3)
    ap.add_argument("--base", type=int, default=4)
    args = ap.parse_args()
    for case, k in (("diffusion", 1), ("diffusion", 2), ("stokes", 2)):
        table = convergence_study(case, k, levels=args.levels, base=args.base)
        print(f"# {case}, k = {k}")
        print(table.to_csv())
        print("final orders: " + ", ".join(f"{f} {table.final_order(f):.2f}" for f in FIELDS) + "\n")
