"""Onsager transport matrix, salt-charge congruence and augmentation."""
from __future__ import annotations

from dataclasses import dataclass

import jax.numpy as jnp
import numpy as np
import scipy.linalg

from .errors import CholeskyFailure, NonpositiveConcentration, NonpositiveDiffusivity
from .species import R


def onsager_matrix(D, c, RT=1.0):
    """Traceable form of the Stefan-Maxwell transport matrix.

    ``D`` is symmetric (n, n) with unused diagonal, ``c`` the species
    concentrations. Off-diagonal entries are ``-RT/(D_ij c_T)``.
    """
    D = jnp.asarray(D)
    c = jnp.asarray(c)
    n = c.shape[0]
    cT = jnp.sum(c)
    eye = jnp.eye(n, dtype=bool)
    Dsafe = jnp.where(eye, 1.0, D)
    off = jnp.where(eye, 0.0, -RT / (Dsafe * cT))
    # M_ii = sum_{k != i} RT c_k / (D_ik c_T c_i)
    diag = -(off @ c) / c
    return off + jnp.diag(diag)


def assemble_M(system, diffusivities, c, T):
    """Transport matrix for concentrations ``c`` (mol/m^3) at temperature ``T``.

    ``diffusivities`` is either an (n, n) array or a callable returning one.
    """
    c = np.asarray(c, dtype=float)
    if np.any(c <= 0):
        raise NonpositiveConcentration("all species concentrations must be positive")
    D = np.asarray(diffusivities(c) if callable(diffusivities) else diffusivities, dtype=float)
    n = system.n
    off = ~np.eye(n, dtype=bool)
    if np.any(D[off] <= 0):
        raise NonpositiveDiffusivity("Stefan-Maxwell diffusivities must be positive")
    return np.asarray(onsager_matrix(D, c, R * T))


def transform_M(basis, M):
    Z = basis.Z
    MZ = Z @ np.asarray(M) @ Z.T
    return 0.5 * (MZ + MZ.T)


def augment(M_Z, psi_Z, gamma, check=True):
    """gamma psi psi^T + M_Z; verified positive-definite by Cholesky."""
    if not gamma > 0:
        raise CholeskyFailure("augmentation parameter must be positive")
    psi_Z = np.asarray(psi_Z, dtype=float)
    Mg = gamma * np.outer(psi_Z, psi_Z) + np.asarray(M_Z)
    if check:
        try:
            scipy.linalg.cholesky(Mg, lower=True)
        except np.linalg.LinAlgError as exc:
            raise CholeskyFailure(str(exc)) from exc
    return Mg


def viscous_stress(eta, zeta, grad_v, d=None):
    grad_v = np.asarray(grad_v, dtype=float)
    d = grad_v.shape[0] if d is None else d
    eps = 0.5 * (grad_v + grad_v.T)
    return 2 * eta * eps + (zeta - 2 * eta / d) * np.trace(grad_v) * np.eye(d)


# ---------------------------------------------------------------------------
# diffusivity models; evaluated inside traced assembly kernels


@dataclass(frozen=True, eq=False)
class ConstantDiffusivity:
    D: np.ndarray  # (n, n) m^2/s

    def __post_init__(self):
        D = np.array(self.D, dtype=float)
        if not np.allclose(D, D.T):
            raise ValueError("diffusivity matrix must be symmetric")
        off = ~np.eye(D.shape[0], dtype=bool)
        if np.any(D[off] <= 0):
            raise NonpositiveDiffusivity("Stefan-Maxwell diffusivities must be positive")
        object.__setattr__(self, "D", D)

    def __call__(self, T, p, x_nu):
        return jnp.asarray(self.D)


@dataclass(frozen=True, eq=False)
class PowerLawDiffusivity:
    """D_ij = D0_ij * (x_salt / x_ref)**exponent_ij, salt fraction clamped to a box."""

    D0: np.ndarray
    exponents: np.ndarray
    salt: int
    x_ref: float
    box: tuple = (1e-4, 0.5)

    def __post_init__(self):
        D0 = np.array(self.D0, dtype=float)
        ex = np.array(self.exponents, dtype=float)
        if ex.ndim == 0:
            ex = np.full_like(D0, float(ex))
        if not (np.allclose(D0, D0.T) and np.allclose(ex, ex.T)):
            raise ValueError("diffusivity parameters must be symmetric")
        off = ~np.eye(D0.shape[0], dtype=bool)
        if np.any(D0[off] <= 0):
            raise NonpositiveDiffusivity("Stefan-Maxwell diffusivities must be positive")
        object.__setattr__(self, "D0", D0)
        object.__setattr__(self, "exponents", ex)

    def __call__(self, T, p, x_nu):
        xs = jnp.clip(x_nu[self.salt], self.box[0], self.box[1])
        return jnp.asarray(self.D0) * (xs / self.x_ref) ** jnp.asarray(self.exponents)
