import numpy as np
import pytest

from osmium.errors import ConfigError
from osmium.femcore import rectangle_mesh
from osmium.manufactured import convergence_study, field_errors, interpolate_exact, manufactured_problem
from osmium.steady import error_metrics, get_assembler, newton_solve


def test_unknown_case():
    with pytest.raises(ConfigError):
        manufactured_problem("vortex", 1, rectangle_mesh(2, 2))


def test_interpolant_residual_shrinks():
    res = []
    for nx in (4, 8):
        problem, exact = manufactured_problem("diffusion", 1, rectangle_mesh(nx, nx))
        state = interpolate_exact(problem, exact)
        asm = get_assembler(problem)
        res.append(np.linalg.norm(asm.residual(asm.extend(state))[: asm.size]))
    assert res[1] < res[0]


def test_first_order_rates_and_normalization_defect():
    table = convergence_study("diffusion", 1, levels=3, base=3)
    errs = np.array([[e[f] for f in ("v", "x", "phi")] for e in table.errors])
    assert np.all(np.diff(errs, axis=0) < 0)
    assert table.final_order("x") >= 0.8
    e2 = []
    for nx in (3, 6, 12):
        problem, exact = manufactured_problem("diffusion", 1, rectangle_mesh(nx, nx))
        state, _ = newton_solve(interpolate_exact(problem, exact), problem)
        e2.append(error_metrics(state, problem)["E2"])
        assert field_errors(state, problem, exact)["x"] < 1
    assert e2[0] > e2[1] > e2[2]


def test_table_csv_has_one_row_per_level():
    table = convergence_study("diffusion", 1, levels=2, base=2)
    lines = table.to_csv().strip().splitlines()
    assert len(lines) == 3 and lines[0].startswith("level,h")
