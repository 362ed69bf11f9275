"""Equations of state, thermodynamic factors, chemical potentials and viscosity.

Evaluators take ``(T, p, x_nu)`` in SI units and are written with
``jax.numpy`` so that assembly kernels can differentiate through them.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import jax
import jax.numpy as jnp
import numpy as np

from .errors import DomainError
from .saltcharge import SaltChargeBasis
from .species import R, ThermodynamicState

CONSTANT = "constant"
COMPOSITION = "composition"
PRESSURE = "pressure"


def volumes_from_molar_volume(vtilde, nu_Z, T, p, x_nu):
    """Partial molar volumes of the salts from the mean molar volume 1/c_T.

    V_k = nu_Z,k v + dv/dx_k - nu_Z,k (x . grad v). The result is independent
    of how ``vtilde`` is extended off the normalization surface.
    """
    x_nu = jnp.asarray(x_nu)
    nu_Z = jnp.asarray(nu_Z)
    v, g = jax.value_and_grad(lambda x: vtilde(T, p, x))(x_nu)
    return nu_Z * v + g - nu_Z * jnp.dot(x_nu, g)


class EquationOfState:
    """Base class: subclasses provide ``total_concentration`` and ``kind``."""

    kind: str = ""
    nu_Z: np.ndarray

    def total_concentration(self, T, p, x_nu):
        raise NotImplementedError

    def molar_volume(self, T, p, x_nu):
        return 1.0 / self.total_concentration(T, p, x_nu)

    def partial_molar_volumes(self, T, p, x_nu):
        return volumes_from_molar_volume(self.molar_volume, self.nu_Z, T, p, x_nu)


@dataclass(frozen=True, eq=False)
class ConstantVolumeEOS(EquationOfState):
    """Constant partial molar volumes: c_T = 1 / (V . x_nu)."""

    V: np.ndarray  # m^3/mol per salt
    nu_Z: np.ndarray
    kind: str = field(default=CONSTANT, init=False)

    def __post_init__(self):
        V = np.array(self.V, dtype=float)
        if np.any(V <= 0):
            raise ValueError("partial molar volumes must be positive")
        V.setflags(write=False)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "nu_Z", np.asarray(self.nu_Z, dtype=float))

    def total_concentration(self, T, p, x_nu):
        return 1.0 / jnp.dot(jnp.asarray(self.V), x_nu)

    def partial_molar_volumes(self, T, p, x_nu):
        return self.V if isinstance(x_nu, np.ndarray) else jnp.asarray(self.V)


@dataclass(frozen=True, eq=False)
class DensityPolynomialEOS(EquationOfState):
    """Density polynomial in one salt fraction: rho = sum a_i x_s^i (kg/m^3).

    c_T = rho / (m_nu . x_nu) with m_nu the salt molar masses.
    """

    coeffs: tuple
    salt: int
    salt_masses: np.ndarray
    nu_Z: np.ndarray
    kind: str = field(default=COMPOSITION, init=False)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(a) for a in self.coeffs))
        object.__setattr__(self, "salt_masses", np.asarray(self.salt_masses, dtype=float))
        object.__setattr__(self, "nu_Z", np.asarray(self.nu_Z, dtype=float))

    def density(self, x_nu):
        xs = x_nu[self.salt]
        return sum(a * xs**i for i, a in enumerate(self.coeffs))

    def total_concentration(self, T, p, x_nu):
        return self.density(x_nu) / jnp.dot(jnp.asarray(self.salt_masses), x_nu)


@dataclass(frozen=True, eq=False)
class ConcentrationPolynomialEOS(EquationOfState):
    """Total concentration polynomial in one salt fraction: c_T = sum a_i x_s^i."""

    coeffs: tuple
    salt: int
    nu_Z: np.ndarray
    kind: str = field(default=COMPOSITION, init=False)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(a) for a in self.coeffs))
        object.__setattr__(self, "nu_Z", np.asarray(self.nu_Z, dtype=float))

    def total_concentration(self, T, p, x_nu):
        xs = x_nu[self.salt]
        return sum(a * xs**i for i, a in enumerate(self.coeffs))


@dataclass(frozen=True, eq=False)
class CompressibleEOS(EquationOfState):
    """c_T = c_T0(x_nu) (1 + kappa p) on top of a composition model."""

    base: EquationOfState
    kappa: float  # 1/Pa
    kind: str = field(default=PRESSURE, init=False)

    @property
    def nu_Z(self):
        return self.base.nu_Z

    def total_concentration(self, T, p, x_nu):
        return self.base.total_concentration(T, p, x_nu) * (1.0 + self.kappa * p)


def density(system, basis: SaltChargeBasis, eos, state: ThermodynamicState) -> float:
    x = _physical(basis, state)
    cT = float(eos.total_concentration(state.T, state.p, jnp.asarray(state.x)))
    return cT * float(system.molar_masses @ x)


def concentrations(system, basis: SaltChargeBasis, eos, state: ThermodynamicState) -> np.ndarray:
    _physical(basis, state)
    cT = float(eos.total_concentration(state.T, state.p, jnp.asarray(state.x)))
    return cT * state.x


def partial_molar_volumes(eos, state: ThermodynamicState) -> np.ndarray:
    return np.asarray(eos.partial_molar_volumes(state.T, state.p, jnp.asarray(state.x)), dtype=float)


def partial_molar_volumes_fd(total_concentration, state: ThermodynamicState, nu_Z, h=1e-6) -> np.ndarray:
    """Central-difference recovery of V_nu from a c_T evaluator alone."""
    x = state.x
    nu_Z = np.asarray(nu_Z, dtype=float)

    def vt(xx):
        cT = float(total_concentration(state.T, state.p, jnp.asarray(xx)))
        if not cT > 0:
            raise DomainError("total concentration is not positive", location=tuple(xx))
        return 1.0 / cT

    g = np.empty_like(x)
    for k in range(len(x)):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (vt(x + e) - vt(x - e)) / (2 * h)
    return nu_Z * vt(x) + g - nu_Z * (x @ g)


def eos_identity_defect(eos, state: ThermodynamicState) -> float:
    """Relative defect of 1/c_T = V . x_nu."""
    x = jnp.asarray(state.x)
    cT = eos.total_concentration(state.T, state.p, x)
    V = eos.partial_molar_volumes(state.T, state.p, x)
    return float(abs(jnp.dot(V, x) * cT - 1.0))


def _physical(basis, state):
    x = basis.Z[:-1].T @ state.x
    if np.any(x <= 0) or np.any(x >= 1):
        raise DomainError("physical mole fractions must lie in (0, 1)", location=state.x_nu)
    return x


def ideal_factors(nu, x_nu):
    """Traceable ideal-mixture factors nu diag(1/x) nu^T, x = nu^T x_nu."""
    nu = jnp.asarray(nu)
    x = nu.T @ x_nu
    return (nu / x) @ nu.T


def ideal_thermo_factors(system, basis: SaltChargeBasis, state: ThermodynamicState) -> np.ndarray:
    _physical(basis, state)
    return np.asarray(ideal_factors(basis.Z[:-1], jnp.asarray(state.x)))


def ideal_potential(nu, x_nu):
    """Dimensionless ideal salt potentials sum_j nu_kj ln x_j."""
    nu = jnp.asarray(nu)
    return nu @ jnp.log(nu.T @ x_nu)


def salt_chemical_potential(system, basis: SaltChargeBasis, eos, state: ThermodynamicState, k: int) -> float:
    """mu_k = RT sum_j nu_kj ln x_j + V_k p (J/mol)."""
    _physical(basis, state)
    x = jnp.asarray(state.x)
    mu = R * state.T * ideal_potential(basis.Z[:-1], x)[k]
    V = eos.partial_molar_volumes(state.T, state.p, x)
    return float(mu + V[k] * state.p)


@dataclass(frozen=True)
class IdealFactors:
    """Ideal-mixture thermodynamic factor model."""

    def __call__(self, nu, T, p, x_nu):
        return ideal_factors(nu, x_nu)


# ---------------------------------------------------------------------------
# viscosity


@dataclass(frozen=True)
class ConstantViscosity:
    eta: float  # Pa s
    zeta: float  # Pa s

    def __post_init__(self):
        if not (self.eta > 0 and self.zeta > 0):
            raise ValueError("viscosities must be positive")

    def __call__(self, T, p, x_nu):
        return jnp.asarray(self.eta), jnp.asarray(self.zeta)


@dataclass(frozen=True)
class SaltPolynomialViscosity:
    """eta = sum a_i x_s^i; zeta = zeta_ratio * eta."""

    coeffs: tuple
    salt: int
    zeta_ratio: float = 1.0

    def __call__(self, T, p, x_nu):
        xs = x_nu[self.salt]
        eta = sum(float(a) * xs**i for i, a in enumerate(self.coeffs))
        return eta, self.zeta_ratio * eta


@dataclass(frozen=True)
class SolventPolynomialViscosity:
    """Bivariate polynomial in the square roots of two solvent fractions.

    eta = sum_ij C_ij a^i b^j with a = sqrt(x_nu[first]), b = sqrt(x_nu[second]).
    """

    coeffs: tuple  # nested rows C[i][j], Pa s
    first: int
    second: int
    zeta_ratio: float = 1.0

    def __call__(self, T, p, x_nu):
        a = jnp.sqrt(x_nu[self.first])
        b = jnp.sqrt(x_nu[self.second])
        eta = 0.0
        for i, row in enumerate(self.coeffs):
            for j, c in enumerate(row):
                if c:
                    eta = eta + float(c) * a**i * b**j
        return eta, self.zeta_ratio * eta


# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MaterialModel:
    """All constitutive laws, sharing one composition box on x_nu."""

    eos: EquationOfState
    diffusivities: object
    viscosity: object
    factors: object = field(default_factory=IdealFactors)
    box_lo: np.ndarray | None = None
    box_hi: np.ndarray | None = None

    def check_domain(self, basis: SaltChargeBasis, x_nu, location=None):
        """Raise DomainError if any point of ``x_nu`` (..., n-1) leaves the box."""
        x_nu = np.asarray(x_nu, dtype=float)
        x = x_nu @ basis.Z[:-1]
        bad = np.any(x <= 0, axis=-1) | np.any(x >= 1, axis=-1)
        if self.box_lo is not None:
            bad |= np.any(x_nu < self.box_lo, axis=-1)
        if self.box_hi is not None:
            bad |= np.any(x_nu > self.box_hi, axis=-1)
        if np.any(bad):
            idx = np.argwhere(np.atleast_1d(bad))[0]
            where = location(idx) if callable(location) else tuple(int(i) for i in idx)
            raise DomainError("composition outside the material model domain", location=where)

    def self_check(self, basis: SaltChargeBasis, T, samples, tol=1e-10):
        """EOS identity on sample states; returns the maximum defect."""
        worst = 0.0
        for x in samples:
            worst = max(worst, eos_identity_defect(self.eos, ThermodynamicState(T, 0.0, x)))
        if worst > tol:
            raise DomainError(f"EOS violates 1/c_T = V.x_nu (defect {worst:.2e})")
        return worst
