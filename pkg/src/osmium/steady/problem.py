"""Problem definition: scales, boundary conditions, constraints and DOF layout."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from ..errors import ConfigError
from ..femcore.spaces import SpaceSetup, boundary_quadrature
from ..saltcharge import SaltChargeBasis
from ..species import F, R
from ..thermo import MaterialModel


@dataclass(frozen=True)
class Scales:
    """Reference length (m), concentration (mol/m^3), diffusivity (m^2/s), temperature (K)."""

    L: float = 1e-3
    c_ref: float = 1e4
    D_ref: float = 1e-10
    T: float = 298.15

    @property
    def RT(self):
        return R * self.T

    @property
    def U(self):
        return self.D_ref / self.L

    @property
    def N_ref(self):
        return self.c_ref * self.D_ref / self.L

    @property
    def P(self):
        return self.c_ref * R * self.T

    @property
    def t_ref(self):
        return self.L**2 / self.D_ref

    @property
    def thermal_voltage(self):
        return R * self.T / F

    @property
    def current(self):
        return F * self.N_ref

    def as_dict(self):
        return {
            "L_m": self.L,
            "c_ref_mol_per_m3": self.c_ref,
            "D_ref_m2_per_s": self.D_ref,
            "T_K": self.T,
            "velocity_m_per_s": self.U,
            "flux_mol_per_m2_s": self.N_ref,
            "pressure_Pa": self.P,
            "time_s": self.t_ref,
            "potential_V": self.thermal_voltage,
            "current_A_per_m2": self.current,
        }


# ---------------------------------------------------------------------------
# boundary conditions (all data nondimensional)


@dataclass(frozen=True)
class ZeroFlux:
    pass


@dataclass(frozen=True)
class GivenFlux:
    """Normal flux value, or ``func(points (m, 2)[, normals (m, 2)]) -> (m,)``."""

    value: float | Callable = 0.0


@dataclass(frozen=True)
class LeakProfile:
    """Quadratic profile on the tag, amplitude solved for as an extra unknown."""


@dataclass(frozen=True)
class ProportionalToCurrent:
    """g_i = alpha * (J . n) in nondimensional current units."""

    alpha: float


@dataclass(frozen=True)
class WeakDirichlet:
    """Composition x_salt = value enforced through a boundary term."""

    value: float


@dataclass(frozen=True)
class ZeroCurrent:
    pass


@dataclass(frozen=True)
class GivenCurrent:
    value: float | Callable = 0.0


@dataclass(frozen=True)
class LinearButlerVolmer:
    """g_J = -i0 (alpha_a + alpha_c) (V_e - Phi)."""

    i0: float
    alpha_sum: float
    V_e: float


@dataclass(frozen=True)
class TanhButlerVolmer:
    """g_J = -2 i0 (x_s / x_ref)^2 tanh(V_e - Phi + s mu_s)."""

    i0: float
    x_ref: float
    V_e: float
    salt: int
    s: float = 0.5


@dataclass(frozen=True)
class ProportionalToSaltFlux:
    """J . n = factor * N_salt . n."""

    salt: int
    factor: float


@dataclass(frozen=True)
class Tangential:
    """Tangential velocity: constant vector or rotation omega * (-(y - cy), x - cx)."""

    vector: tuple = (0.0, 0.0)
    omega: float = 0.0
    center: tuple = (0.0, 0.0)
    func: Callable | None = None

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        if self.func is not None:
            return np.asarray(self.func(pts), dtype=float)
        out = np.broadcast_to(np.asarray(self.vector, dtype=float), pts.shape).copy()
        if self.omega:
            out[..., 0] += -self.omega * (pts[..., 1] - self.center[1])
            out[..., 1] += self.omega * (pts[..., 0] - self.center[0])
        return out


@dataclass(frozen=True)
class TagBC:
    salts: tuple  # one salt flux spec per salt
    current: object = field(default_factory=ZeroCurrent)
    tangential: Tangential = field(default_factory=Tangential)


SOLUTION_DEPENDENT_CURRENT = (LinearButlerVolmer, TanhButlerVolmer, ProportionalToSaltFlux)


@dataclass(frozen=True)
class BoundaryConditionSet:
    tags: dict  # tag -> TagBC

    def validate(self, mesh, n_salts):
        missing = set(mesh.boundary_tags) - set(self.tags)
        if missing:
            raise ConfigError(f"boundary tags without conditions: {sorted(missing)}")
        leak = [t for t, bc in self.tags.items() if any(isinstance(s, LeakProfile) for s in bc.salts)]
        if len(leak) > 1:
            raise ConfigError("a leak profile may be used on one tag only")
        for t, bc in self.tags.items():
            if len(bc.salts) != n_salts:
                raise ConfigError(f"tag {t!r}: expected {n_salts} salt conditions")
            if sum(isinstance(s, LeakProfile) for s in bc.salts) > 1:
                raise ConfigError("a leak profile may control one salt only")
            cur = bc.current
            if isinstance(cur, (TanhButlerVolmer, ProportionalToSaltFlux)) and not 0 <= cur.salt < n_salts:
                raise ConfigError(f"tag {t!r}: current condition references salt {cur.salt}")
            for s in bc.salts:
                if isinstance(s, ProportionalToCurrent) and isinstance(cur, ProportionalToSaltFlux):
                    raise ConfigError(f"tag {t!r}: circular flux/current proportionality")

    @property
    def leak_tag(self):
        for t, bc in self.tags.items():
            if any(isinstance(s, LeakProfile) for s in bc.salts):
                return t
        return None

    @property
    def leak_salt(self):
        t = self.leak_tag
        if t is None:
            return None
        return next(i for i, s in enumerate(self.tags[t].salts) if isinstance(s, LeakProfile))


# ---------------------------------------------------------------------------
# integral constraints


@dataclass(frozen=True)
class Normalization:
    """Mean of nu_Z . x_nu equals one."""


@dataclass(frozen=True)
class MeanPressure:
    value: float = 0.0  # nondimensional mean pressure


@dataclass(frozen=True)
class MeanPotential:
    value: float = 0.0


@dataclass(frozen=True)
class TotalMass:
    mean_density: float  # kg/m^3


@dataclass(frozen=True)
class TotalMoles:
    salt: int
    mean_concentration: float | str = "initial"  # nondimensional, or taken from the initial state


@dataclass(frozen=True)
class ConstraintSet:
    items: tuple
    slots: tuple  # row group receiving each multiplier: "mavg", "cont:<i>", "cont:J" or None

    def __post_init__(self):
        if len(self.items) != len(self.slots):
            raise ConfigError("one slot per constraint is required")

    @property
    def n_multipliers(self):
        return sum(s is not None for s in self.slots)

    def describe(self):
        out = []
        for c in self.items:
            if isinstance(c, TotalMoles):
                out.append(f"TotalMoles({c.salt})")
            else:
                out.append(type(c).__name__)
        return out


# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Layout:
    """Offsets of unknown blocks in the flat state vector."""

    nV: int
    nP: int
    nN: int
    nX: int
    n: int
    n_mult: int
    has_leak: bool

    @cached_property
    def offsets(self):
        o = {}
        pos = 0
        for name, size in (
            ("v", 2 * self.nV),
            ("p", self.nP),
            ("N", self.n * self.nN),
            ("x", (self.n - 1) * self.nX),
            ("phi", self.nX),
            ("mult", self.n_mult),
            ("leak", int(self.has_leak)),
        ):
            o[name] = (pos, pos + size)
            pos += size
        o["total"] = pos
        return o

    @property
    def size(self):
        return self.offsets["total"]

    def block(self, name):
        a, b = self.offsets[name]
        return slice(a, b)

    def v_index(self, comp, dofs):
        return self.offsets["v"][0] + comp * self.nV + np.asarray(dofs)

    def N_index(self, species, dofs):
        return self.offsets["N"][0] + species * self.nN + np.asarray(dofs)

    def x_index(self, salt, dofs):
        return self.offsets["x"][0] + salt * self.nX + np.asarray(dofs)


@dataclass(eq=False)
class DiscreteState:
    """Flat nondimensional DOF vector with named views."""

    layout: Layout
    vec: np.ndarray

    def __post_init__(self):
        self.vec = np.asarray(self.vec, dtype=float)
        if self.vec.shape != (self.layout.size,):
            raise ValueError(f"state vector has size {self.vec.shape}, expected {self.layout.size}")

    def copy(self):
        return DiscreteState(self.layout, self.vec.copy())

    @property
    def v(self):
        return self.vec[self.layout.block("v")].reshape(2, -1)

    @property
    def p(self):
        return self.vec[self.layout.block("p")]

    @property
    def N_Z(self):
        """Transformed fluxes; the last row is J / (F |z|) in flux units."""
        return self.vec[self.layout.block("N")].reshape(self.layout.n, -1)

    @property
    def x(self):
        return self.vec[self.layout.block("x")].reshape(self.layout.n - 1, -1)

    @property
    def phi(self):
        return self.vec[self.layout.block("phi")]

    @property
    def multipliers(self):
        return self.vec[self.layout.block("mult")]

    @property
    def leak(self):
        s = self.layout.block("leak")
        return float(self.vec[s][0]) if self.layout.has_leak else 0.0


@dataclass(eq=False)
class Problem:
    """Everything needed to assemble the discrete equations on one mesh."""

    setup: SpaceSetup
    basis: SaltChargeBasis
    material: MaterialModel
    bcs: BoundaryConditionSet
    constraints: ConstraintSet
    scales: Scales = field(default_factory=Scales)
    gamma: float = 1e-2
    forcing: object = (0.0, 0.0)  # body force f, nondimensional; vector or func(points)
    sources: object = None  # manufactured sources: func(points) -> (src_v (..,2), src_c (..,n))
    frozen: bool = False
    reference_moles: np.ndarray | None = None  # per-salt mean concentration for TotalMoles("initial")

    def __post_init__(self):
        self.bcs.validate(self.setup.mesh, self.n - 1)
        free = sum(s is None for s in self.constraints.slots)
        has_leak = self.bcs.leak_tag is not None
        if free != int(has_leak):
            raise ConfigError(
                "exactly one constraint without a multiplier slot is required with a leak condition, none otherwise"
            )

    @property
    def n(self):
        return self.basis.n

    @cached_property
    def layout(self) -> Layout:
        s = self.setup
        return Layout(s.V.ndofs, s.P.ndofs, s.N.ndofs, s.X.ndofs, self.n, self.constraints.n_multipliers,
                      self.bcs.leak_tag is not None)

    def zero_state(self) -> DiscreteState:
        return DiscreteState(self.layout, np.zeros(self.layout.size))

    def uniform_state(self, x_nu) -> DiscreteState:
        """Uniform composition (constant DG fields), all other unknowns zero."""
        st = self.zero_state()
        x_nu = np.asarray(x_nu, dtype=float)
        for i in range(self.n - 1):
            dofs = np.arange(self.setup.X.ndofs)
            st.vec[self.layout.x_index(i, dofs)] = _dg_constant(self.setup, x_nu[i])
        return st

    @cached_property
    def boundary(self):
        return boundary_quadrature(self.setup)


def _dg_constant(setup, value):
    # nodal DG bases reproduce constants with all-equal coefficients
    return np.full(setup.X.ndofs, float(value))
