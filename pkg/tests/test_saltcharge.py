import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from osmium.errors import DependentReactions, NotIdentityForUncharged, NotNeutral, NotSimpleSalt, BasisError
from osmium.saltcharge import (
    auto_basis,
    build_transform,
    flux_to_transformed,
    from_transformed,
    mole_fractions,
    psi_Z,
    to_transformed,
    validate_basis,
)
from osmium.species import F, Species, validate_system

from conftest import five_species, lipf6

FIVE_NU = [[1, 0, 0, 0, 0], [0, 1, 1, 0, 0], [0, 0, 2, 1, 0], [0, 2, 0, 0, 1]]


def test_five_species_matrix():
    basis = build_transform(five_species(), validate_basis(five_species(), FIVE_NU))
    expect = np.array(FIVE_NU + [[0, 1, -1, 2, -2]], dtype=float)
    expect[-1] /= math.sqrt(10)
    np.testing.assert_array_equal(basis.Z, expect)
    np.testing.assert_allclose(basis.Z_invT @ basis.Z.T, np.eye(5), atol=1e-14)
    np.testing.assert_array_equal(basis.nu_Z, [1, 2, 3, 3])


@pytest.mark.parametrize("rows, err", [
    ([[1, 0, 0, 0, 0], [0, 2, 2, 0, 0], [0, 0, 2, 1, 0], [0, 2, 0, 0, 1]], NotSimpleSalt),
    ([[0, 1, 0, 0, 0], [0, 1, 1, 0, 0], [0, 0, 2, 1, 0], [0, 2, 0, 0, 1]], NotIdentityForUncharged),
    ([[1, 0, 0, 0, 0], [0, 1, 2, 0, 0], [0, 0, 2, 1, 0], [0, 2, 0, 0, 1]], NotNeutral),
    ([[1, 0, 0, 0, 0], [0, 1, 1, 0, 0], [0, 1, 1, 0, 0], [0, 2, 0, 0, 1]], DependentReactions),
    ([[1, 0, 0, 0, 0], [1, 1, 1, 0, 0], [0, 0, 2, 1, 0], [0, 2, 0, 0, 1]], NotSimpleSalt),
    ([[1, 0, 0, 0, 0], [0, 1, 1, 0, 0]], BasisError),
])
def test_invalid_bases(rows, err):
    with pytest.raises(err):
        validate_basis(five_species(), rows)


def test_auto_basis_lipf6():
    b = auto_basis(lipf6())
    np.testing.assert_array_equal(b.matrix(), [[1, 0, 0], [0, 1, 1]])


def test_auto_basis_five_species_is_valid():
    b = build_transform(five_species())
    assert b.Z.shape == (5, 5)
    assert abs(np.linalg.det(b.Z)) > 0.1


def test_mole_fractions_sum_to_nu():
    basis = build_transform(lipf6())
    x_nu = np.array([0.85, 0.075])
    x = mole_fractions(basis, x_nu)
    np.testing.assert_allclose(x, [0.85, 0.075, 0.075])
    assert x.sum() == pytest.approx(basis.nu_Z @ x_nu, rel=1e-14)


def test_flux_current():
    basis = build_transform(lipf6())
    N = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0]])
    N_nu, J = flux_to_transformed(basis, N, F)
    np.testing.assert_allclose(J, [2 * F, 0.0], rtol=1e-14)


def test_psi_requires_positive_density():
    with pytest.raises(ValueError):
        psi_Z(build_transform(lipf6()), 0.0)


def _system(n):
    charges = {3: (0, 1, -1), 4: (0, 0, 1, -1), 5: (0, 1, -1, 2, -2)}[n]
    return validate_system([Species(f"s{i}", 0.05 + 0.01 * i, z) for i, z in enumerate(charges)])


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([3, 4, 5]), st.integers(0, 2**32 - 1))
def test_gibbs_and_dissipation_invariance(n, seed):
    rng = np.random.default_rng(seed)
    basis = build_transform(_system(n))
    mu = rng.standard_normal(n)
    c_Z = np.concatenate([rng.uniform(0.1, 2.0, n - 1), [0.0]])
    c = from_transformed(basis, c_Z)
    mu_Z = basis.Z @ mu
    assert abs(c @ mu - c_Z @ mu_Z) <= 1e-12 * max(abs(c @ mu), 1e-300) + 1e-14
    N = rng.standard_normal((n, 2))
    G = rng.standard_normal((n, 2))
    lhs = np.trace(N.T @ G)
    rhs = np.trace(to_transformed(basis, N).T @ (basis.Z @ G))
    assert abs(lhs - rhs) <= 1e-12 * np.linalg.norm(N) * np.linalg.norm(G)


@given(st.sampled_from([3, 4, 5]), st.integers(0, 2**32 - 1))
def test_roundtrip(n, seed):
    rng = np.random.default_rng(seed)
    basis = build_transform(_system(n))
    w = rng.standard_normal(n)
    np.testing.assert_allclose(from_transformed(basis, to_transformed(basis, w)), w, rtol=1e-12, atol=1e-13)


@given(st.integers(0, 2**32 - 1))
def test_electroneutral_concentrations_have_zero_charge_coordinate(seed):
    rng = np.random.default_rng(seed)
    basis = build_transform(five_species(), validate_basis(five_species(), FIVE_NU))
    c_nu = rng.uniform(0.1, 1.0, 4)
    c = from_transformed(basis, np.append(c_nu, 0.0))
    assert abs(c @ basis.system.charges) <= 1e-12 * np.abs(c).sum()
    np.testing.assert_allclose(to_transformed(basis, c)[:-1], c_nu, rtol=1e-12)
