import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from osmium.errors import CholeskyFailure, NonpositiveConcentration, NonpositiveDiffusivity
from osmium.saltcharge import build_transform, from_transformed, psi_Z
from osmium.species import R
from osmium.transport import (
    ConstantDiffusivity,
    PowerLawDiffusivity,
    assemble_M,
    augment,
    onsager_matrix,
    transform_M,
    viscous_stress,
)

from conftest import lipf6

T = 298.15


def _random_D(rng, n):
    D = rng.uniform(0.5, 5.0, (n, n)) * 1e-10
    return 0.5 * (D + D.T)


def test_two_species_closed_form():
    # binary mixture: M = RT x1 x2 / (D c_T) [[1/x1^2.. ]] reduces to known entries
    c = np.array([3.0, 1.0])
    D = np.array([[1.0, 2.0], [2.0, 1.0]])
    M = np.asarray(onsager_matrix(D, c, RT=1.0))
    cT = 4.0
    np.testing.assert_allclose(M, [[1 / (2 * cT) / 3.0, -1 / (2 * cT)], [-1 / (2 * cT), 3.0 / (2 * cT)]], rtol=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_kernel_symmetry_and_semidefiniteness(seed):
    rng = np.random.default_rng(seed)
    s = lipf6()
    c = rng.uniform(1.0, 1e4, 3)
    M = assemble_M(s, _random_D(rng, 3), c, T)
    assert np.linalg.norm(M @ c) <= 1e-12 * np.linalg.norm(M) * np.linalg.norm(c)
    assert np.max(np.abs(M - M.T)) <= 1e-13 * np.max(np.abs(M))
    ev = np.linalg.eigvalsh(M)
    assert ev[0] >= -1e-12 * ev[-1]
    assert ev[1] > 1e-8 * ev[-1]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1e-3, 1e-2, 1e-1, 1.0]))
def test_augmented_matrix(seed, gamma):
    # nondimensional units (RT = 1, c and D of order one), as in assembly
    rng = np.random.default_rng(seed)
    s = lipf6()
    basis = build_transform(s)
    c_nu = np.array([rng.uniform(0.5, 1.0), rng.uniform(0.01, 0.1)])
    c = from_transformed(basis, np.append(c_nu, 0.0))
    M_Z = transform_M(basis, assemble_M(s, _random_D(rng, 3) * 1e10, c, 1 / R))
    ev = np.linalg.eigvalsh(M_Z)
    assert np.sum(np.abs(ev) < 1e-10 * ev[-1]) == 1
    psi = psi_Z(basis, float(s.molar_masses @ c))
    Mg = augment(M_Z, psi, gamma)
    c_Z = np.append(c_nu, 0.0)
    # psi_Z . c_Z = 1 so the kernel direction picks up exactly gamma
    assert c_Z @ Mg @ c_Z == pytest.approx(gamma, rel=1e-10)


def test_errors():
    s = lipf6()
    with pytest.raises(NonpositiveConcentration):
        assemble_M(s, np.ones((3, 3)), [1.0, 0.0, 1.0], T)
    with pytest.raises(NonpositiveDiffusivity):
        assemble_M(s, -np.ones((3, 3)), [1.0, 1.0, 1.0], T)
    with pytest.raises(CholeskyFailure):
        augment(np.eye(2), [1.0, 0.0], 0.0)
    with pytest.raises(CholeskyFailure):
        augment(-np.eye(2), [1.0, 0.0], 1e-2)
    with pytest.raises(ValueError):
        ConstantDiffusivity(np.array([[1.0, 2.0], [3.0, 1.0]]))


def test_rt_scaling():
    s = lipf6()
    c = np.array([9000.0, 700.0, 700.0])
    D = np.full((3, 3), 1e-10)
    M1 = assemble_M(s, D, c, 300.0)
    M2 = assemble_M(s, D, c, 600.0)
    np.testing.assert_allclose(M2, 2 * M1, rtol=1e-14)
    assert M1[0, 1] == pytest.approx(-R * 300.0 / (1e-10 * c.sum()))


def test_power_law_clamps():
    D0 = np.full((3, 3), 1e-10)
    model = PowerLawDiffusivity(D0, 1.0, 1, 0.1)
    np.testing.assert_allclose(np.asarray(model(T, 0.0, np.array([0.8, 0.1]))), D0)
    np.testing.assert_allclose(np.asarray(model(T, 0.0, np.array([0.8, 0.9]))), 5 * D0)


def test_viscous_stress_trace():
    g = np.array([[1.0, 2.0], [0.0, 3.0]])
    tau = viscous_stress(2.0, 5.0, g)
    np.testing.assert_allclose(tau, tau.T)
    assert np.trace(tau) == pytest.approx(2 * 5.0 * 4.0)
