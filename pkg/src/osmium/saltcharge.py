"""Salt-charge change of basis built from neutralizing-reaction stoichiometries."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    DependentReactions,
    NotIdentityForUncharged,
    NotNeutral,
    NotSimpleSalt,
    SingularTransform,
    BasisError,
)
from .species import SpeciesSystem, charge_norm


@dataclass(frozen=True)
class NeutralizationBasis:
    nu: tuple  # n-1 integer tuples of length n

    def matrix(self) -> np.ndarray:
        return np.array(self.nu, dtype=np.int64)


def validate_basis(system: SpeciesSystem, nu_list) -> NeutralizationBasis:
    n, n_c = system.n, system.n_c
    nu = np.array(nu_list)
    if nu.shape != (n - 1, n):
        raise BasisError(f"expected {n - 1} reaction vectors of length {n}, got shape {nu.shape}")
    if not np.all(np.equal(np.mod(nu, 1), 0)):
        raise NotSimpleSalt("stoichiometric coefficients must be integers")
    nu = nu.astype(np.int64)
    z = system.charges
    n_u = n - n_c
    for i in range(n_u):
        if not np.array_equal(nu[i], np.eye(n, dtype=np.int64)[i]):
            raise NotIdentityForUncharged(f"reaction {i + 1} must be the identity reaction")
    for i in range(n_u, n - 1):
        row = nu[i]
        if np.any(row[:n_u] != 0):
            raise NotSimpleSalt(f"reaction {i + 1} involves an uncharged species")
        nz = np.flatnonzero(row)
        if len(nz) != 2 or np.any(row[nz] <= 0):
            raise NotSimpleSalt(f"reaction {i + 1} must combine exactly two ions with positive coefficients")
        if math.gcd(int(row[nz[0]]), int(row[nz[1]])) != 1:
            raise NotSimpleSalt(f"reaction {i + 1} coefficients are not coprime")
        if int(row @ z) != 0:
            raise NotNeutral(f"reaction {i + 1} is not charge neutral")
    if n_c > 1:
        charged = nu[n_u:, n_u:].astype(float)
        if charged.shape[0] and np.linalg.matrix_rank(charged) < n_c - 1:
            raise DependentReactions("salt-forming reactions are linearly dependent")
    return NeutralizationBasis(tuple(tuple(int(v) for v in row) for row in nu))


def auto_basis(system: SpeciesSystem) -> NeutralizationBasis:
    """Canonical basis: identity reactions, then pair each ion with species n or n-1.

    Ion i is paired with species n when their charges have opposite sign,
    otherwise with species n-1.
    """
    n, n_c = system.n, system.n_c
    z = [int(v) for v in system.charges]
    rows = []
    for i in range(n - n_c):
        rows.append(tuple(int(i == j) for j in range(n)))
    for i in range(n - n_c, n - 1):
        q = n - 1 if z[i] * z[n - 1] < 0 else n - 2
        g = math.gcd(abs(z[i]), abs(z[q]))
        row = [0] * n
        row[i] = abs(z[q]) // g
        row[q] = abs(z[i]) // g
        rows.append(tuple(row))
    return validate_basis(system, rows)


@dataclass(frozen=True, eq=False)
class SaltChargeBasis:
    system: SpeciesSystem
    basis: NeutralizationBasis
    Z: np.ndarray = field(repr=False)
    Z_invT: np.ndarray = field(repr=False)
    nu_Z: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.system.n

    @property
    def znorm(self) -> float:
        return charge_norm(self.system)

    @property
    def salt_molar_masses(self) -> np.ndarray:
        """Molar masses of the neutral salts, (Z m)_{1..n-1}."""
        return (self.Z @ self.system.molar_masses)[:-1]


def build_transform(system: SpeciesSystem, basis: NeutralizationBasis | None = None) -> SaltChargeBasis:
    if basis is None:
        basis = auto_basis(system)
    n = system.n
    Z = np.empty((n, n))
    Z[:-1] = basis.matrix()
    Z[-1] = system.charges / charge_norm(system)
    try:
        lu = scipy.linalg.lu_factor(Z.T, check_finite=True)
        Z_invT = scipy.linalg.lu_solve(lu, np.eye(n))
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularTransform(str(exc)) from exc
    if not np.all(np.isfinite(Z_invT)) or abs(np.prod(np.diag(lu[0]))) < 1e-14:
        raise SingularTransform("transformation matrix is singular")
    nu_Z = Z[:-1].sum(axis=1)
    for arr in (Z, Z_invT, nu_Z):
        arr.setflags(write=False)
    return SaltChargeBasis(system, basis, Z, Z_invT, nu_Z)


def to_transformed(basis: SaltChargeBasis, w):
    """Z^{-T} w; for an (n, d) flux matrix this acts row-wise."""
    return basis.Z_invT @ np.asarray(w, dtype=float)


def from_transformed(basis: SaltChargeBasis, w_Z):
    return basis.Z.T @ np.asarray(w_Z, dtype=float)


def split(w_Z):
    """Return (w_nu, last entry) of a transformed vector or flux matrix."""
    w_Z = np.asarray(w_Z)
    return w_Z[:-1], w_Z[-1]


def mole_fractions(basis: SaltChargeBasis, x_nu):
    """Physical mole fractions x = Z^T [x_nu; 0]."""
    x_nu = np.asarray(x_nu, dtype=float)
    return basis.Z[:-1].T @ x_nu


def flux_to_transformed(basis: SaltChargeBasis, N, F):
    """Map species fluxes (n, d) to (N_nu, J) with J = F N^T z."""
    N_Z = to_transformed(basis, N)
    J = N_Z[-1] * F * basis.znorm
    return N_Z[:-1], J


def psi_Z(basis: SaltChargeBasis, rho):
    if not rho > 0:
        raise ValueError("density must be positive")
    return basis.Z @ basis.system.molar_masses / rho
