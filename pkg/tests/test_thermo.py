import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from osmium.errors import DomainError
from osmium.saltcharge import build_transform
from osmium.species import R, ThermodynamicState
from osmium.thermo import (
    CompressibleEOS,
    ConcentrationPolynomialEOS,
    ConstantViscosity,
    ConstantVolumeEOS,
    DensityPolynomialEOS,
    MaterialModel,
    SaltPolynomialViscosity,
    SolventPolynomialViscosity,
    concentrations,
    density,
    eos_identity_defect,
    ideal_factors,
    ideal_potential,
    partial_molar_volumes,
    partial_molar_volumes_fd,
    salt_chemical_potential,
)
from osmium.transport import ConstantDiffusivity
from osmium.verify import appendix_a_volumes, bundled_eos

from conftest import lipf6


def _x(s):
    return np.array([1 - 2 * s, s])


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.2), st.floats(-1e5, 1e5))
def test_eos_identity_all_bundled(s, p):
    state = ThermodynamicState(298.15, p, _x(s))
    for eos in bundled_eos():
        assert eos_identity_defect(eos, state) <= 1e-10


@settings(max_examples=20, deadline=None)
@given(st.floats(0.02, 0.2))
def test_autodiff_volumes_match_fd(s):
    state = ThermodynamicState(298.15, 0.0, _x(s))
    for eos in bundled_eos():
        V = partial_molar_volumes(eos, state)
        Vfd = partial_molar_volumes_fd(eos.total_concentration, state, eos.nu_Z)
        np.testing.assert_allclose(V, Vfd, rtol=1e-6)


def test_constant_volume_exact():
    basis = build_transform(lipf6())
    eos = ConstantVolumeEOS([1e-4, 5e-5], basis.nu_Z)
    x = np.array([0.85, 0.075])
    assert float(eos.total_concentration(298.15, 0.0, x)) == pytest.approx(1 / (0.85e-4 + 0.075 * 5e-5))
    np.testing.assert_array_equal(partial_molar_volumes(eos, ThermodynamicState(298.15, 0.0, x)), [1e-4, 5e-5])
    with pytest.raises(ValueError):
        ConstantVolumeEOS([1e-4, 0.0], basis.nu_Z)


def test_density_eos_consistency():
    s = lipf6()
    basis = build_transform(s)
    eos = DensityPolynomialEOS((1006.0, 2600.0), 1, basis.salt_molar_masses, basis.nu_Z)
    state = ThermodynamicState(298.15, 0.0, [0.85, 0.075])
    assert density(s, basis, eos, state) == pytest.approx(1006.0 + 2600.0 * 0.075, rel=1e-12)
    c = concentrations(s, basis, eos, state)
    assert float(s.charges @ basis.Z[:-1].T @ c) == pytest.approx(0.0, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 0.9))
def test_ideal_factors_are_jacobian_of_potential(a):
    nu = jnp.asarray([[1.0, 0, 0], [0, 1, 1]])
    x = np.array([a, (1 - a) / 2])
    X = np.asarray(ideal_factors(nu, jnp.asarray(x)))
    h = 1e-6
    fd = np.stack([(np.asarray(ideal_potential(nu, jnp.asarray(x + h * e)))
                    - np.asarray(ideal_potential(nu, jnp.asarray(x - h * e)))) / (2 * h) for e in np.eye(2)], 1)
    assert np.max(np.abs(fd - X)) <= 1e-6 * np.max(np.abs(X))
    np.testing.assert_allclose(X, X.T)


def test_salt_potential_pressure_term():
    s = lipf6()
    basis = build_transform(s)
    eos = ConstantVolumeEOS([1e-4, 5e-5], basis.nu_Z)
    a = salt_chemical_potential(s, basis, eos, ThermodynamicState(298.15, 0.0, [0.85, 0.075]), 1)
    b = salt_chemical_potential(s, basis, eos, ThermodynamicState(298.15, 1e5, [0.85, 0.075]), 1)
    assert b - a == pytest.approx(5e-5 * 1e5)
    assert a == pytest.approx(R * 298.15 * 2 * np.log(0.075))


def test_appendix_volume_oracle():
    V1, V2, defect = appendix_a_volumes(2.0, 1.0, 0.5)
    assert V1 == pytest.approx(0.32, abs=1e-15)
    assert V2 == pytest.approx(0.48, abs=1e-15)
    assert defect <= 1e-15


def test_compressible_kind_and_scaling():
    basis = build_transform(lipf6())
    base = ConstantVolumeEOS([1e-4, 5e-5], basis.nu_Z)
    eos = CompressibleEOS(base, 1e-9)
    x = jnp.asarray([0.85, 0.075])
    assert eos.kind == "pressure" and base.kind == "constant"
    assert float(eos.total_concentration(298.15, 1e6, x)) == pytest.approx(
        1.001 * float(base.total_concentration(298.15, 0.0, x)))
    assert ConcentrationPolynomialEOS((1e4,), 1, basis.nu_Z).kind == "composition"


def test_viscosity_models():
    assert ConstantViscosity(1e-3, 2e-3)(0, 0, None)[1] == 2e-3
    with pytest.raises(ValueError):
        ConstantViscosity(0.0, 1.0)
    eta, zeta = SaltPolynomialViscosity((1.0, 2.0), 1, 0.5)(0, 0, np.array([0.8, 0.1]))
    assert eta == pytest.approx(1.2) and zeta == pytest.approx(0.6)
    eta, _ = SolventPolynomialViscosity(((0.0, 1.0), (2.0, 0.0)), 0, 1)(0, 0, jnp.asarray([0.25, 0.36, 0.1]))
    assert float(eta) == pytest.approx(0.6 + 2 * 0.5)


def test_material_domain():
    basis = build_transform(lipf6())
    eos = ConstantVolumeEOS([1e-4, 5e-5], basis.nu_Z)
    mat = MaterialModel(eos, ConstantDiffusivity(np.full((3, 3), 1e-10)), ConstantViscosity(1e-3, 1e-3),
                        box_hi=np.array([1.0, 0.2]))
    mat.check_domain(basis, [0.85, 0.075])
    with pytest.raises(DomainError):
        mat.check_domain(basis, [0.5, 0.25])
    with pytest.raises(DomainError):
        mat.check_domain(basis, [1.2, -0.1])
    assert mat.self_check(basis, 298.15, [[0.85, 0.075]]) <= 1e-12
