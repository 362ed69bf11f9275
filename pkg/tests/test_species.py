import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from osmium.errors import OrderingViolation, SpeciesError, TooFewSpecies
from osmium.species import Species, ThermodynamicState, charge_norm, charge_vector, validate_system

from conftest import five_species, lipf6


def test_lipf6_charges():
    s = lipf6()
    np.testing.assert_array_equal(charge_vector(s), [0, 1, -1])
    assert charge_norm(s) == math.sqrt(2)
    assert s.n == 3 and s.n_c == 2 and s.n_uncharged == 1
    assert s.names == ["EMC", "Li", "PF6"]


def test_five_species_norm():
    s = five_species()
    np.testing.assert_array_equal(s.charges, [0, 1, -1, 2, -2])
    assert charge_norm(s) == math.sqrt(10)


def test_ordering_rules():
    with pytest.raises(OrderingViolation):
        validate_system([Species("A", 0.1, 1), Species("S", 0.1, 0), Species("B", 0.1, -1)])
    with pytest.raises(OrderingViolation):
        validate_system([Species("S", 0.1, 0), Species("A", 0.1, 1), Species("B", 0.1, 2)])
    with pytest.raises(TooFewSpecies):
        validate_system([Species("A", 0.1, 1), Species("B", 0.1, -1)])
    with pytest.raises(TooFewSpecies):
        validate_system([])


def test_species_validation():
    with pytest.raises(SpeciesError):
        Species("X", 0.0, 1)
    with pytest.raises(SpeciesError):
        Species("X", 0.1, 0.5)
    s = validate_system([{"name": "S", "molar_mass": 0.1, "charge": 0},
                         {"name": "A", "molar_mass": 0.1, "charge": 1},
                         {"name": "B", "molar_mass": 0.1, "charge": -1}])
    assert s.n == 3


def test_state_requires_positive_temperature():
    with pytest.raises(SpeciesError):
        ThermodynamicState(0.0, 0.0, [0.5, 0.25])
    st_ = ThermodynamicState(300.0, 1.0, np.array([0.5, 0.25]))
    np.testing.assert_array_equal(st_.x, [0.5, 0.25])


@given(st.lists(st.integers(-3, 3).filter(bool), min_size=2, max_size=4), st.integers(0, 2))
def test_accepted_systems_have_opposite_charges(charges, n_solvent):
    # force the last two charges to have opposite signs
    charges = list(charges)
    charges[-1] = -np.sign(charges[-2]) * abs(charges[-1])
    species = [Species(f"s{i}", 0.1, 0) for i in range(n_solvent)]
    species += [Species(f"i{i}", 0.1, z) for i, z in enumerate(charges)]
    if n_solvent + len(charges) < 3:
        with pytest.raises(TooFewSpecies):
            validate_system(species)
        return
    s = validate_system(species)
    z = s.charges
    assert z.max() > 0 and z.min() < 0
    assert charge_norm(s) ** 2 == pytest.approx(float(z @ z), rel=1e-15)
