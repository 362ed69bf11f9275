import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from osmium.errors import IllPosedError, IllPosedWarning
from osmium.scenario import load_scenario
from osmium.steady import check_well_posed, newton_solve, salt_moles
from osmium.transient import (
    RADAU_IIA_1,
    RADAU_IIA_2,
    consistent_initialization,
    dense_irk,
    dense_irk_step,
    ensure_reference_moles,
    get_tableau,
    observed_order,
    run,
    step,
)

from conftest import box_scenario

GIVEN = {"left": {"kind": "given", "value": -0.5}, "right": {"kind": "given", "value": 0.5}}


def _decay(y):
    return -y


def _decay_jac(y):
    return -np.eye(len(y))


@pytest.mark.parametrize("tab", [RADAU_IIA_1, RADAU_IIA_2])
def test_tableau_consistency(tab):
    A = tab.matrix()
    assert np.allclose(A.sum(axis=1), [float(c) for c in tab.c])
    assert sum(tab.b) == 1
    assert tab.stiffly_accurate
    assert float(tab.c[-1]) == 1.0


def test_unknown_scheme():
    with pytest.raises(ValueError):
        get_tableau("RadauIIA-7")


@given(st.floats(1e-3, 10.0))
@settings(max_examples=30, deadline=None)
def test_backward_euler_is_exact_rational(dt):
    y1 = dense_irk_step(_decay, _decay_jac, [[1.0]], [1.0], dt, RADAU_IIA_1)
    assert abs(y1[0] - 1 / (1 + dt)) <= 1e-14


@given(st.floats(1e-3, 10.0))
@settings(max_examples=30, deadline=None)
def test_radau2_stability_function(dt):
    # R(z) = (1 + z/3) / (1 - 2z/3 + z^2/6) for z = -dt
    z = -dt
    y1 = dense_irk_step(_decay, _decay_jac, [[1.0]], [1.0], dt, RADAU_IIA_2)
    assert abs(y1[0] - (1 + z / 3) / (1 - 2 * z / 3 + z * z / 6)) <= 1e-13


def test_radau2_third_order():
    dts = np.array([0.2, 0.1, 0.05, 0.025])
    errs = [abs(dense_irk(_decay, _decay_jac, [[1.0]], [1.0], dt, int(round(1 / dt)), RADAU_IIA_2)[-1, 0] - np.exp(-1))
            for dt in dts]
    assert abs(observed_order(errs, dts) - 3.0) <= 0.2


def test_index_one_dae_stays_on_constraint():
    # y1' = -y1 + y2, 0 = y2 - y1^2 / 2
    M = np.diag([1.0, 0.0])

    def f(y):
        return np.array([-y[0] + y[1], y[1] - 0.5 * y[0] ** 2])

    def jac(y):
        return np.array([[-1.0, 1.0], [-y[0], 1.0]])

    traj = dense_irk(f, jac, M, [1.0, 0.5], 0.1, 10, RADAU_IIA_2)
    assert np.max(np.abs(traj[:, 1] - 0.5 * traj[:, 0] ** 2)) <= 1e-12


def _setup(current=GIVEN, eos=None, steps=3, **extra):
    cfg = box_scenario(current=current, eos=eos, nx=3, time={"scheme": "RadauIIA-2", "dt": 864.0, "steps": steps},
                       **extra)
    return load_scenario(cfg).build("transient")


def test_confined_run_conserves_moles():
    rs = _setup()
    states, rep = run(rs.initial, rs.stepper, rs.problem)
    assert len(states) == 4 and len(rep.rows) == 4
    assert rep.relative_drift().max() <= 1e-8
    assert rep.max_E2 <= 1e-6
    m0 = salt_moles(states[0], rs.problem)
    assert np.allclose(salt_moles(states[-1], rs.problem), m0, rtol=1e-8)


def test_report_table_and_history():
    rs = _setup(steps=2)
    _, rep = run(rs.initial, rs.stepper, rs.problem)
    header = rep.header(2)
    rows = rep.table()
    assert len(rows) == 3 and all(len(r) == len(header) for r in rows)
    assert all(len(r.history) == r.iterations + 1 for r in rep.rows[1:])


def test_equilibrium_step_is_fixed_point():
    rs = _setup(current={})
    s1, rep = step(rs.initial, rs.stepper, rs.problem)
    assert rep.iterations == 0
    assert np.array_equal(s1.vec, rs.initial.vec)


def test_steady_state_is_fixed_point():
    scn = load_scenario(box_scenario(current=GIVEN, nx=3))
    steady = scn.build("steady")
    ensure_reference_moles(steady.initial, steady.problem)
    s, _ = newton_solve(steady.initial, steady.problem, steady.newton)
    tr = scn.build("transient")
    u = tr.problem.uniform_state([0.85, 0.075])
    for b in ("v", "p", "N", "x", "phi"):
        u.vec[tr.problem.layout.block(b)] = s.vec[steady.problem.layout.block(b)]
    s1, _ = step(u, tr.stepper, tr.problem)
    fld = slice(0, tr.problem.layout.offsets["mult"][0])
    assert np.linalg.norm(s1.vec[fld] - u.vec[fld]) <= 1e-10 * np.linalg.norm(u.vec[fld])


def test_consistent_initialization_keeps_composition():
    rs = _setup()
    s, rep = consistent_initialization(rs.initial, rs.problem)
    assert np.max(np.abs(s.x - rs.initial.x)) <= 1e-14
    assert rep.final_residual <= 1e-10
    # a current drives a potential gradient right away
    assert np.ptp(s.phi) > 0


def test_illposed_transient_needs_override():
    hull_eos = {"kind": "density_polynomial", "coeffs": [1006.0, 2600.0], "salt": 1}
    rs = _setup(eos=hull_eos)
    assert rs.analysis.case == "ii"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IllPosedWarning)
        with pytest.raises(IllPosedError):
            check_well_posed(rs.analysis)
    with pytest.warns(IllPosedWarning):
        check_well_posed(rs.analysis, override=True)
