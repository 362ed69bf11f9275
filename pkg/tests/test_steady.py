import dataclasses
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from osmium.errors import ConfigError, IllPosedError, IllPosedWarning, SingularLinearSystem
from osmium.saltcharge import build_transform
from osmium.scenario import load_scenario
from osmium.steady import (
    BoundaryConditionSet,
    ConstraintSet,
    GivenCurrent,
    LeakProfile,
    LinearButlerVolmer,
    MeanPressure,
    Normalization,
    NewtonSettings,
    ProportionalToCurrent,
    TagBC,
    TanhButlerVolmer,
    ZeroCurrent,
    ZeroFlux,
    analyze_constraints,
    check_well_posed,
    error_metrics,
    fd_check,
    get_assembler,
    newton_solve,
    potential_guess,
    salt_moles,
)
from osmium.transient import ensure_reference_moles
from osmium.verify import constant_test_identities, fd_fixture

from conftest import box_scenario, lipf6, random_state

BV = TanhButlerVolmer(1.0, 0.075, 0.0, 1, 0.5)


def _bcs(left_current, leak=False):
    prop = ProportionalToCurrent(0.5)
    return BoundaryConditionSet({
        "left": TagBC((LeakProfile() if leak else ZeroFlux(), prop), left_current),
        "right": TagBC((ZeroFlux(), prop), GivenCurrent(0.0) if isinstance(left_current, GivenCurrent) else BV),
        "bottom": TagBC((ZeroFlux(), ZeroFlux()), ZeroCurrent()),
        "top": TagBC((ZeroFlux(), ZeroFlux()), ZeroCurrent()),
    })


def _kinds(analysis):
    return [type(c).__name__ for c in analysis.constraints.items]


def test_steady_case_i_counts():
    an = analyze_constraints(lipf6(), _bcs(GivenCurrent(0.0)), "constant", "steady")
    assert (an.case, an.l, an.k) == ("i", 0, 4)
    assert _kinds(an) == ["Normalization", "MeanPressure", "MeanPotential", "TotalMoles"]
    assert an.well_posed


def test_steady_case_ii_counts():
    an = analyze_constraints(lipf6(), _bcs(BV), "constant", "steady")
    assert (an.case, an.l, an.k) == ("ii", 1, 3)
    assert _kinds(an) == ["Normalization", "MeanPressure", "TotalMoles"]


def test_transient_case_i_counts():
    an = analyze_constraints(lipf6(), _bcs(BV), "constant", "transient")
    assert an.case == "i"
    assert _kinds(an) == ["Normalization", "MeanPressure"]
    assert an.well_posed


def test_transient_case_ii_warns_without_leak():
    an = analyze_constraints(lipf6(), _bcs(BV), "composition", "transient")
    assert an.case == "ii"
    assert isinstance(an.warning, IllPosedWarning)
    assert "WARNING" in an.summary()
    with pytest.warns(IllPosedWarning), pytest.raises(IllPosedError):
        check_well_posed(an)
    with pytest.warns(IllPosedWarning):
        check_well_posed(an, override=True)


def test_transient_case_ii_with_leak_is_well_posed():
    an = analyze_constraints(lipf6(), _bcs(BV, leak=True), "composition", "transient")
    assert an.well_posed and an.leak
    assert an.constraints.slots[0] is None


def test_transient_case_iii():
    an = analyze_constraints(lipf6(), _bcs(BV), "pressure", "transient")
    assert an.case == "iii" and an.well_posed
    assert _kinds(an) == ["Normalization"]


def test_bad_regime():
    with pytest.raises(ValueError):
        analyze_constraints(lipf6(), _bcs(BV), "constant", "sometimes")


def _solve(cfg, regime="steady"):
    run = load_scenario(cfg).build(regime)
    ensure_reference_moles(run.initial, run.problem)
    return run, newton_solve(potential_guess(run.initial, run.problem), run.problem)


def test_equilibrium_is_immediate():
    run, (state, rep) = _solve(box_scenario())
    assert rep.converged and rep.iterations <= 2
    m = error_metrics(state, run.problem)
    assert m["E1"] <= 1e-12 and m["E2"] <= 1e-12


def test_missing_normalization_is_singular():
    run = load_scenario(box_scenario()).build("steady")
    p = run.problem
    keep = [i for i, c in enumerate(p.constraints.items) if not isinstance(c, Normalization)]
    cs = ConstraintSet(tuple(p.constraints.items[i] for i in keep), tuple(p.constraints.slots[i] for i in keep))
    reduced = dataclasses.replace(p, constraints=cs)
    ensure_reference_moles(reduced.uniform_state([0.85, 0.075]), reduced)
    with pytest.raises(SingularLinearSystem, match="analyze_constraints"):
        newton_solve(random_state(reduced, 3, 0.01), reduced)


def test_leak_requires_free_slot():
    run = load_scenario(box_scenario()).build("steady")
    with pytest.raises(ConfigError):
        dataclasses.replace(run.problem, bcs=_bcs(BV, leak=True))


def test_given_current_drives_flow():
    cur = {"left": {"kind": "given", "value": -1.0}, "right": {"kind": "given", "value": 1.0}}
    run, (state, rep) = _solve(box_scenario(cur, nx=4))
    assert rep.converged
    assert np.ptp(state.phi) > 0
    # salt is conserved by the moles constraint
    np.testing.assert_allclose(salt_moles(state, run.problem) / run.problem.setup.dx.sum(),
                               run.problem.reference_moles, rtol=1e-10)


def test_jacobian_matches_finite_differences():
    problem, state = fd_fixture(seed=0)
    assert fd_check(state, problem, seed=1) <= 1e-5


@pytest.mark.parametrize("order", [1, 2])
def test_jacobian_box(order):
    cur = {"left": {"kind": "linear_bv", "i0": 10.0, "alpha_sum": 1.0, "V_e": 0.01},
           "right": {"kind": "linear_bv", "i0": 10.0, "alpha_sum": 1.0, "V_e": 0.0}}
    run = load_scenario(box_scenario(cur, nx=2, order=order)).build("steady")
    ensure_reference_moles(run.initial, run.problem)
    assert fd_check(random_state(run.problem, 5), run.problem) <= 1e-5


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_constant_test_identities_hold_for_any_state(seed):
    cur = {"left": {"kind": "given", "value": -1.0}, "right": {"kind": "given", "value": 1.0}}
    run = load_scenario(box_scenario(cur, nx=2)).build("steady")
    ensure_reference_moles(run.initial, run.problem)
    defects = constant_test_identities(random_state(run.problem, seed), run.problem)
    assert set(defects) == {"mavg", "cont:0", "cont:1", "cont:J"}
    assert max(defects.values()) <= 1e-12


def test_newton_report_history():
    cur = {"left": {"kind": "given", "value": -1.0}, "right": {"kind": "given", "value": 1.0}}
    run = load_scenario(box_scenario(cur, nx=2)).build("steady")
    ensure_reference_moles(run.initial, run.problem)
    state, rep = newton_solve(run.initial, run.problem, NewtonSettings(tol=1e-11))
    assert rep.history[0] > rep.history[-1] and rep.final_residual <= 1e-11
    assert rep.rows()[0] == (0, rep.history[0])
    # quadratic convergence near the solution
    h = rep.history
    assert h[-1] <= 1e-3 * h[-2] or h[-1] <= 1e-13


def test_assembler_cached():
    run = load_scenario(box_scenario()).build("steady")
    assert get_assembler(run.problem) is get_assembler(run.problem)
