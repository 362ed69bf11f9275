"""Command line front end: ``osmium steady|transient|convergence|check|appendix-a``.

Every run directory receives ``scenario.json`` (the resolved configuration)
before anything is solved. Exit codes: 2 configuration error, 3 solver
non-convergence or singular system, 4 ill-posed problem without override,
1 failed checks.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError, IllPosedError, NonConvergence, OsmiumError, SingularLinearSystem

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_SOLVER, EXIT_ILLPOSED = 0, 1, 2, 3, 4

BUNDLED = Path(__file__).parent / "scenarios"


def bundled_scenario(name: str) -> Path:
    """Path of a scenario shipped with the package (``name`` with or without ``.scn``)."""
    p = BUNDLED / (name if name.endswith(".scn") else name + ".scn")
    if not p.exists():
        raise ConfigError(f"no bundled scenario {name!r}; available: {', '.join(list_bundled())}")
    return p


def list_bundled():
    return sorted(p.stem for p in BUNDLED.glob("*.scn"))


def _scenario_path(arg):
    if arg is None:
        raise ConfigError("--scenario is required")
    p = Path(arg)
    return p if p.exists() else bundled_scenario(arg)


def _out_dir(args, default):
    out = Path(args.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    return str(v)


def _start(args, regime_default):
    """Load the scenario and write its echo; returns (scenario, out_dir)."""
    from .scenario import load_scenario

    scn = load_scenario(_scenario_path(args.scenario))
    out = _out_dir(args, f"osmium_{scn.name}_{regime_default}")
    (out / "scenario.json").write_text(scn.echo())
    return scn, out


def _check_policy(analysis, override, report):
    from .steady.constraints import check_well_posed

    report["constraint_analysis"] = analysis.summary()
    if analysis.warning is not None:
        report["warning"] = str(analysis.warning)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        check_well_posed(analysis, override=override)


def _convergence_rows(history, step=None):
    return [([step] if step is not None else []) + [i, float(r)] for i, r in enumerate(history)]


def solvent_ratio_range(state, problem):
    """Min and max of x_0 / x_1 (first two uncharged species) over quadrature points, or None."""
    from .steady.metrics import quadrature_fields

    basis = problem.basis
    if basis.system.n_uncharged < 2:
        return None
    xt = quadrature_fields(state, problem)["xt"]
    full = np.concatenate([xt, np.zeros(xt.shape[:-1] + (1,))], axis=-1) @ basis.Z
    ratio = full[..., 0] / full[..., 1]
    return [float(ratio.min()), float(ratio.max())]


def _state_metrics(state, problem):
    from .steady.metrics import error_metrics, salt_moles, total_mass, weak_dirichlet_report

    out = dict(error_metrics(state, problem))
    out["salt_moles"] = salt_moles(state, problem).tolist()
    out["mass"] = total_mass(state, problem)
    wd = weak_dirichlet_report(state, problem)
    if wd:
        out["weak_dirichlet"] = wd
    ratio = solvent_ratio_range(state, problem)
    if ratio is not None:
        out["solvent_ratio_range"] = ratio
    return out


def _snapshot(out, name, state, problem, title):
    from .output import write_vtk

    write_vtk(out / f"{name}.vtk", state, problem, title)


# ---------------------------------------------------------------------------
# subcommands


def cmd_steady(args):
    from .output import write_csv
    from .steady.initial import potential_guess
    from .steady.newton import newton_solve
    from .transient import ensure_reference_moles

    scn, out = _start(args, "steady")
    if scn.is_manufactured:
        return _manufactured_single(scn, out)
    run = scn.build("steady")
    problem = run.problem
    report = {"scenario": scn.name, "command": "steady", "scales": problem.scales.as_dict()}
    _check_policy(run.analysis, args.override_illposed, report)
    ensure_reference_moles(run.initial, problem)
    guess = potential_guess(run.initial, problem) if scn.config["initial"]["potential_guess"] else run.initial
    try:
        state, rep = newton_solve(guess, problem, run.newton)
    except (NonConvergence, SingularLinearSystem) as exc:
        if getattr(exc, "history", None):
            write_csv(out / "convergence.csv", ["iteration", "residual"], _convergence_rows(exc.history))
        report["error"] = f"{type(exc).__name__}: {exc}"
        _write_json(out / "report.json", report)
        raise
    write_csv(out / "convergence.csv", ["iteration", "residual"], _convergence_rows(rep.history))
    report.update(newton_iterations=rep.iterations, final_residual=rep.final_residual)
    report["metrics"] = _state_metrics(state, problem)
    _write_json(out / "report.json", report)
    if scn.config["output"]["vtk"]:
        _snapshot(out, "solution", state, problem, f"{scn.name} steady")
    m = report["metrics"]
    print(f"{scn.name}: converged in {rep.iterations} Newton iterations; E1 = {m['E1']:.3e}, E2 = {m['E2']:.3e}")
    return EXIT_OK


def cmd_transient(args):
    from .output import write_csv
    from .transient import consistent_initialization, run as run_transient

    scn, out = _start(args, "transient")
    if scn.is_manufactured:
        raise ConfigError("manufactured scenarios are steady; use the convergence command")
    setup = scn.build("transient")
    problem, stepper = setup.problem, setup.stepper
    report = {"scenario": scn.name, "command": "transient", "scales": problem.scales.as_dict(),
              "scheme": stepper.scheme, "dt_s": stepper.dt, "steps": stepper.steps}
    _check_policy(setup.analysis, args.override_illposed, report)
    state = setup.initial
    if scn.config["initial"]["consistent"]:
        state, rep0 = consistent_initialization(state, problem, setup.newton)
        report["consistent_initialization_iterations"] = rep0.iterations
    every = int(scn.config["output"]["snapshot_every"])
    vtk = bool(scn.config["output"]["vtk"])

    def snapshot(k, st, row):
        if vtk and ((every > 0 and k % every == 0) or k == stepper.steps):
            _snapshot(out, f"snapshot_{k:04d}", st, problem, f"{scn.name} step {k} t = {row.time:.6g} s")

    def finish(trep):
        conv = [row for r in trep.rows[1:] for row in _convergence_rows(r.history, r.step)]
        write_csv(out / "convergence.csv", ["step", "iteration", "residual"], conv)
        write_csv(out / "transient.csv", trep.header(problem.n - 1), trep.table())

    try:
        states, trep = run_transient(state, stepper, problem, callback=snapshot, warning=report.get("warning"))
    except (NonConvergence, DomainError, SingularLinearSystem) as exc:
        if getattr(exc, "report", None) is not None:
            finish(exc.report)
        report["error"] = f"{type(exc).__name__}: {exc}"
        _write_json(out / "report.json", report)
        raise
    finish(trep)
    drift = trep.relative_drift()
    report.update(
        max_E1=trep.max_E1,
        max_E2=trep.max_E2,
        relative_moles_drift=drift.tolist(),
        newton_iterations=[r.iterations for r in trep.rows[1:]],
    )
    report["final"] = _state_metrics(states[-1], problem)
    _write_json(out / "report.json", report)
    print(f"{scn.name}: {stepper.steps} steps of {stepper.scheme}; max E1 = {trep.max_E1:.3e}, "
          f"max E2 = {trep.max_E2:.3e}, max relative moles drift = {drift.max():.3e}")
    if "solvent_ratio_range" in report["final"]:
        lo, hi = report["final"]["solvent_ratio_range"]
        print(f"solvent ratio x0/x1 across the cell: {lo:.9e} .. {hi:.9e}")
    if "warning" in report:
        print(f"WARNING: {report['warning']}")
    return EXIT_OK


def _manufactured_single(scn, out):
    from .femcore import rectangle_mesh
    from .manufactured import field_errors, interpolate_exact, manufactured_problem
    from .output import write_csv
    from .steady.newton import newton_solve

    m = scn.config["manufactured"]
    nx = int(m.get("base", 4))
    problem, exact = manufactured_problem(m["case"], int(scn.config["order"]), rectangle_mesh(nx, nx),
                                          float(scn.config["gamma"]))
    state, rep = newton_solve(interpolate_exact(problem, exact), problem, scn.build_newton())
    write_csv(out / "convergence.csv", ["iteration", "residual"], _convergence_rows(rep.history))
    errs = field_errors(state, problem, exact)
    _write_json(out / "report.json", {"scenario": scn.name, "command": "steady", "scales": problem.scales.as_dict(),
                                      "newton_iterations": rep.iterations, "errors": errs})
    print(f"{scn.name}: manufactured {m['case']} on {nx}x{nx}: " + ", ".join(f"{k} {v:.3e}" for k, v in errs.items()))
    return EXIT_OK


def cmd_convergence(args):
    from .manufactured import FIELDS, convergence_study

    scn, out = _start(args, "convergence")
    if not scn.is_manufactured:
        raise ConfigError("the convergence command needs a scenario with a 'manufactured' section")
    m = scn.config["manufactured"]
    levels = int(args.levels if args.levels is not None else m.get("levels", 3))
    if levels < 2:
        raise ConfigError("at least two levels are needed for observed orders")
    orders = m.get("orders", [scn.config["order"]])
    summary = {"scenario": scn.name, "command": "convergence", "case": m["case"], "levels": levels, "tables": {}}
    for k in orders:
        table = convergence_study(m["case"], int(k), levels=levels, base=int(m.get("base", 4)),
                                  gamma=float(scn.config["gamma"]), settings=scn.build_newton())
        (out / f"convergence_{m['case']}_k{k}.csv").write_text(table.to_csv())
        summary["tables"][f"k{k}"] = {f: table.final_order(f) for f in FIELDS}
        print(f"{m['case']} k={k}: final orders " + ", ".join(f"{f} {table.final_order(f):.2f}" for f in FIELDS))
    _write_json(out / "report.json", summary)
    return EXIT_OK


def cmd_check(args):
    from .verify import invariant_suite, report_csv, report_text

    out = _out_dir(args, "osmium_check")
    (out / "scenario.json").write_text(json.dumps({"command": "check", "seed": args.seed}, indent=2) + "\n")
    results = invariant_suite(seed=args.seed)
    (out / "checks.csv").write_text(report_csv(results))
    text = report_text(results)
    (out / "checks.txt").write_text(text + "\n")
    print(text)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


def cmd_appendix_a(args):
    from .verify import appendix_a_evolution, appendix_a_volumes

    A, B = float(args.A), float(args.B)
    out = _out_dir(args, "osmium_appendix_a")
    (out / "scenario.json").write_text(json.dumps(
        {"command": "appendix-a", "A": A, "B": B, "steps": args.steps, "seed": args.seed}, indent=2) + "\n")
    lines, ok = [], True
    both = appendix_a_evolution(A, B, steps=args.steps, constraints=2, seed=args.seed)
    (out / "both_constraints.csv").write_text(both.to_csv())
    passed = both.max_variance <= 1e-12 and both.solved
    ok &= passed
    lines += ["[both constraints, uniform start] " + ("PASS" if passed else "FAIL"), both.summary()]
    one = appendix_a_evolution(A, B, steps=args.steps, constraints=1, perturbation=1.0, seed=args.seed)
    (out / "one_constraint_perturbed.csv").write_text(one.to_csv())
    passed = one.max_variance > 1e-6
    ok &= passed
    lines += ["[one constraint, perturbed] " + ("PASS" if passed else "FAIL"), one.summary()]
    try:
        V1, V2, defect = appendix_a_volumes(A, B, 0.4)
        lines.append(f"partial molar volumes at x = 0.4: V1 = {V1:.6g}, V2 = {V2:.6g}, defect {defect:.1e}")
    except OsmiumError as exc:
        lines.append(f"partial molar volumes unavailable: {exc}")
    text = "\n".join(lines)
    (out / "appendix_a.txt").write_text(text + "\n")
    print(text)
    return EXIT_OK if ok else EXIT_FAILED


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="osmium", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True):
        if scenario:
            sp.add_argument("--scenario", help="scenario file, or the name of a bundled scenario")
        sp.add_argument("--out", help="run directory (created if missing)")
        sp.add_argument("--override-illposed", action="store_true",
                        help="run even when the constraint analysis reports an ill-posed problem")
        sp.add_argument("--seed", type=int, default=0)

    common(sub.add_parser("steady", help="steady Newton solve"))
    common(sub.add_parser("transient", help="RadauIIA time integration"))
    c = sub.add_parser("convergence", help="manufactured-solution convergence study")
    common(c)
    c.add_argument("--levels", type=int, default=None)
    common(sub.add_parser("check", help="invariant suite"), scenario=False)
    a = sub.add_parser("appendix-a", help="1D two-species demonstration of overconstrained conservation")
    common(a, scenario=False)
    a.add_argument("--A", type=float, default=2.0)
    a.add_argument("--B", type=float, default=1.0)
    a.add_argument("--steps", type=int, default=100)
    sub.add_parser("list", help="list bundled scenarios")
    return p


COMMANDS = {
    "steady": cmd_steady,
    "transient": cmd_transient,
    "convergence": cmd_convergence,
    "check": cmd_check,
    "appendix-a": cmd_appendix_a,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "list":
        print("\n".join(list_bundled()))
        return EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except IllPosedError as exc:
        print(f"error: ill-posed problem: {exc} (pass --override-illposed to run anyway)", file=sys.stderr)
        return EXIT_ILLPOSED
    except ConfigError as exc:
        print(f"error: configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SingularLinearSystem as exc:
        print(f"error: SingularLinearSystem: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (NonConvergence, DomainError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
