"""Species bookkeeping: charges, molar masses and ordering conventions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OrderingViolation, SpeciesError, TooFewSpecies


@dataclass(frozen=True)
class PhysicalConstants:
    R: float = 8.314462618  # J/(mol K)
    F: float = 96485.33212  # C/mol


CONSTANTS = PhysicalConstants()
R = CONSTANTS.R
F = CONSTANTS.F


@dataclass(frozen=True)
class Species:
    name: str
    molar_mass: float  # kg/mol
    charge: int

    def __post_init__(self):
        if not self.molar_mass > 0:
            raise SpeciesError(f"species {self.name!r}: molar mass must be positive")
        if int(self.charge) != self.charge:
            raise SpeciesError(f"species {self.name!r}: charge must be an integer")
        object.__setattr__(self, "charge", int(self.charge))


@dataclass(frozen=True)
class SpeciesSystem:
    """Ordered species: uncharged first, last two charges of opposite sign."""

    species: tuple[Species, ...]
    n: int = field(init=False)
    n_c: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "species", tuple(self.species))
        object.__setattr__(self, "n", len(self.species))
        object.__setattr__(self, "n_c", sum(1 for s in self.species if s.charge != 0))

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.species]

    @property
    def molar_masses(self) -> np.ndarray:
        return np.array([s.molar_mass for s in self.species], dtype=float)

    @property
    def charges(self) -> np.ndarray:
        return np.array([s.charge for s in self.species], dtype=np.int64)

    @property
    def n_uncharged(self) -> int:
        return self.n - self.n_c


def validate_system(species_list) -> SpeciesSystem:
    species = [s if isinstance(s, Species) else Species(**s) for s in species_list]
    if not species:
        raise TooFewSpecies("empty species list")
    n = len(species)
    n_c = sum(1 for s in species if s.charge != 0)
    if n < 3 or n_c < 2:
        raise TooFewSpecies(f"need n >= 3 and n_c >= 2, got n={n}, n_c={n_c}")
    charges = [s.charge for s in species]
    first_charged = n - n_c
    if any(z != 0 for z in charges[:first_charged]) or any(z == 0 for z in charges[first_charged:]):
        raise OrderingViolation("uncharged species must precede all charged species")
    if charges[-1] * charges[-2] >= 0:
        raise OrderingViolation("the last two species must be oppositely charged")
    return SpeciesSystem(tuple(species))


def charge_vector(system: SpeciesSystem) -> np.ndarray:
    return system.charges.copy()


def charge_norm(system: SpeciesSystem) -> float:
    # exact integer sum before the square root
    return math.sqrt(int(sum(int(z) * int(z) for z in system.charges)))


@dataclass(frozen=True)
class ThermodynamicState:
    """Temperature, pressure and transformed mole fractions ``x_nu`` (length n-1)."""

    T: float
    p: float
    x_nu: tuple

    def __post_init__(self):
        if not self.T > 0:
            raise SpeciesError("temperature must be positive")
        object.__setattr__(self, "x_nu", tuple(float(v) for v in np.ravel(self.x_nu)))

    @property
    def x(self) -> np.ndarray:
        return np.asarray(self.x_nu, dtype=float)
