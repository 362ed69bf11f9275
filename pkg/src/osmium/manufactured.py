"""Manufactured solutions of the full steady system and a convergence harness.

Velocity, pressure, salt fractions and potential are prescribed analytically.
The fluxes then follow pointwise from the flux-force relation
M^gamma N = gamma psi v + psi grad p - [V grad p + X^T grad x; |z| grad Phi],
which makes the mass-average constraint hold exactly, and the momentum and
continuity sources are obtained by automatic differentiation. Boundary data
(normal fluxes, normal current, tangential velocity) are taken from the exact
fields, and the integral constraints pin the exact means.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np

from .errors import ConfigError
from .femcore import build_spaces, rectangle_mesh
from .femcore.spaces import evaluate_rt, evaluate_scalar, interpolate_lagrange, project_dg, project_rt
from .saltcharge import build_transform
from .species import R, Species, validate_system
from .steady.kernels import make_props
from .steady.problem import (
    BoundaryConditionSet,
    ConstraintSet,
    GivenCurrent,
    GivenFlux,
    MeanPotential,
    MeanPressure,
    Normalization,
    Problem,
    Scales,
    TagBC,
    Tangential,
    TotalMoles,
)
from .thermo import ConstantViscosity, ConstantVolumeEOS, MaterialModel
from .transport import ConstantDiffusivity

# unit scales: RT = 1 and all reference quantities 1, so every coefficient is O(1)
UNIT_SCALES = Scales(L=1.0, c_ref=1.0, D_ref=1.0, T=1.0 / R)
PI = np.pi


def _diffusion_fields(X):
    x, y = X[0], X[1]
    xs = 0.1 + 0.03 * jnp.cos(PI * x) * jnp.cos(2 * PI * y) + 0.02 * x * y
    p = 0.2 * jnp.sin(PI * x) * jnp.cos(PI * y)
    phi = 0.3 * jnp.cos(PI * x) * jnp.sin(PI * y) + 0.1 * x
    v = 0.05 * jnp.stack([jnp.sin(PI * x) * jnp.sin(PI * y), jnp.cos(PI * x) * jnp.cos(PI * y)])
    return xs, p, phi, v


def _stokes_fields(X):
    x, y = X[0], X[1]
    xs = 0.1 + 0.0 * x
    p = jnp.cos(PI * x) * jnp.cos(PI * y)
    phi = 0.0 * x
    v = jnp.stack([
        jnp.sin(PI * x) ** 2 * jnp.sin(2 * PI * y),
        -jnp.sin(2 * PI * x) * jnp.sin(PI * y) ** 2,
    ])
    return xs, p, phi, v


CASES = {"diffusion": _diffusion_fields, "stokes": _stokes_fields}


def manufactured_material():
    """Three-species electrolyte with O(1) nondimensional coefficients."""
    system = validate_system([Species("S", 0.1, 0), Species("A", 0.02, 1), Species("B", 0.05, -1)])
    basis = build_transform(system)
    D = np.array([[1.0, 3.0, 4.0], [3.0, 1.0, 2.0], [4.0, 2.0, 1.0]])
    eos = ConstantVolumeEOS((1.0, 0.6), basis.nu_Z)
    return basis, MaterialModel(eos, ConstantDiffusivity(D), ConstantViscosity(1.0, 1.0))


@dataclass(frozen=True, eq=False)
class ExactSolution:
    """Pointwise exact fields; every method maps points (..., 2) to values."""

    name: str
    problem_template: object  # (basis, material, gamma)

    def __post_init__(self):
        basis, material, gamma = self.problem_template
        fields = CASES[self.name]
        nu_Z = jnp.asarray(basis.nu_Z)
        znorm = float(basis.znorm)
        n = basis.n
        probe = _PropsProbe(basis, material, gamma)
        props = make_props(probe)

        def xnu(X):
            xs = fields(X)[0]
            return jnp.stack([(1 - nu_Z[1] * xs) / nu_Z[0], xs])

        def scal(X):
            _, p, phi, _ = fields(X)
            return p, phi

        def flux(X):
            x = xnu(X)
            p, phi = scal(X)
            v = fields(X)[3]
            gx = jax.jacfwd(xnu)(X)  # (n-1, 2)
            gp, gphi = jax.jacfwd(scal)(X)
            pr = props(x, p)
            force = pr["psi"][:, None] * gp[None, :]
            salt = pr["V"][:, None] * gp[None, :] + jnp.einsum("ki,kd->id", pr["X"], gx)
            force = force.at[: n - 1].add(-salt)
            force = force.at[n - 1].add(-znorm * gphi)
            rhs = gamma * pr["psi"][:, None] * v[None, :] + force
            return jnp.linalg.solve(pr["Mg"], rhs)  # (n, 2)

        def div_flux(X):
            return jnp.trace(jax.jacfwd(flux)(X), axis1=1, axis2=2)

        def stress(X):
            x = xnu(X)
            p, _ = scal(X)
            pr = props(x, p)
            gv = jax.jacfwd(lambda Y: fields(Y)[3])(X)
            eps = 0.5 * (gv + gv.T)
            return 2 * pr["eta"] * eps + (pr["zeta"] - pr["eta"]) * jnp.trace(gv) * jnp.eye(2)

        def conv(X):
            x = xnu(X)
            p, _ = scal(X)
            v = fields(X)[3]
            return props(x, p)["rho_m"] * jnp.outer(v, v)

        def src_v(X):
            gp = jax.grad(lambda Y: scal(Y)[0])(X)
            div_conv = jnp.trace(jax.jacfwd(conv)(X), axis1=1, axis2=2)
            div_tau = jnp.trace(jax.jacfwd(stress)(X), axis1=1, axis2=2)
            return div_conv + gp - div_tau

        def pack(fn):
            f = jax.jit(jax.vmap(fn))

            def call(pts):
                pts = np.asarray(pts, dtype=float)
                out = np.asarray(f(pts.reshape(-1, 2)))
                return out.reshape(pts.shape[:-1] + out.shape[1:])

            return call

        object.__setattr__(self, "x", pack(xnu))
        object.__setattr__(self, "p", pack(lambda X: scal(X)[0]))
        object.__setattr__(self, "phi", pack(lambda X: scal(X)[1]))
        object.__setattr__(self, "v", pack(lambda X: fields(X)[3]))
        object.__setattr__(self, "N", pack(flux))
        object.__setattr__(self, "div_N", pack(div_flux))
        object.__setattr__(self, "src_v", pack(src_v))
        object.__setattr__(self, "cT", pack(lambda X: props(xnu(X), scal(X)[0])["cT"]))
        object.__setattr__(self, "psi", pack(lambda X: props(xnu(X), scal(X)[0])["psi"]))

    def sources(self, pts):
        return self.src_v(pts), self.div_N(pts)


@dataclass(frozen=True, eq=False)
class _PropsProbe:
    """Minimal stand-in carrying what make_props reads from a Problem."""

    basis: object
    material: object
    gamma: float
    scales: Scales = UNIT_SCALES


def manufactured_problem(name, order, mesh, gamma=1.0):
    """Problem whose exact solution is the named manufactured case."""
    if name not in CASES:
        raise ConfigError(f"unknown manufactured case {name!r}; choose from {sorted(CASES)}")
    basis, material = manufactured_material()
    exact = ExactSolution(name, (basis, material, gamma))
    n = basis.n
    setup = build_spaces(mesh, order)

    def normal_flux(i):
        return lambda pts, nrm: np.einsum("mc,mc->m", exact.N(pts)[:, i, :], nrm)

    def current(pts, nrm):
        return basis.znorm * np.einsum("mc,mc->m", exact.N(pts)[:, n - 1, :], nrm)

    tang = Tangential(func=exact.v)
    bc = TagBC(tuple(GivenFlux(normal_flux(i)) for i in range(n - 1)), GivenCurrent(current), tang)
    bcs = BoundaryConditionSet({t: bc for t in set(mesh.boundary_tags)})
    # exact means on a fine rule
    area = float(setup.dx.sum())
    qp = setup.quad_points
    mean_p = float(np.sum(setup.dx * exact.p(qp)) / area)
    mean_phi = float(np.sum(setup.dx * exact.phi(qp)) / area)
    mean_c = float(np.sum(setup.dx * exact.cT(qp) * exact.x(qp)[..., 1]) / area)
    constraints = ConstraintSet(
        (Normalization(), MeanPressure(mean_p), MeanPotential(mean_phi), TotalMoles(1, mean_c)),
        ("cont:0", "mavg", "cont:J", "cont:1"),
    )
    problem = Problem(setup, basis, material, bcs, constraints, scales=UNIT_SCALES, gamma=gamma,
                      sources=exact.sources)
    return problem, exact


def interpolate_exact(problem, exact):
    """Discrete state built from nodal interpolation / local projection of the exact fields."""
    s = problem.setup
    L = problem.layout
    st = problem.zero_state()
    vv = exact.v(s.V.dof_coords)
    for c in range(2):
        st.vec[L.v_index(c, np.arange(s.V.ndofs))] = vv[:, c]
    st.vec[L.block("p")] = interpolate_lagrange(s.P, exact.p)
    for i in range(problem.n - 1):
        st.vec[L.x_index(i, np.arange(s.X.ndofs))] = project_dg(s, lambda pts: exact.x(pts)[..., i])
    st.vec[L.block("phi")] = project_dg(s, exact.phi)
    for i in range(problem.n):
        st.vec[L.N_index(i, np.arange(s.N.ndofs))] = project_rt(s, lambda pts, i=i: exact.N(pts)[..., i, :])
    return st


def field_errors(state, problem, exact):
    """L2 errors of v, p, x_nu, N_Z and Phi against the exact solution."""
    s = problem.setup
    qp = s.quad_points
    w = s.dx
    n = problem.n
    v = np.stack([evaluate_scalar(s, s.V, state.v[c]) for c in range(2)], axis=-1)
    out = {"v": np.sqrt(np.sum(w * np.sum((v - exact.v(qp)) ** 2, axis=-1)))}
    out["p"] = np.sqrt(np.sum(w * (evaluate_scalar(s, s.P, state.p) - exact.p(qp)) ** 2))
    xe = exact.x(qp)
    out["x"] = np.sqrt(sum(np.sum(w * (evaluate_scalar(s, s.X, state.x[i]) - xe[..., i]) ** 2) for i in range(n - 1)))
    Ne = exact.N(qp)
    out["N"] = np.sqrt(sum(np.sum(w * np.sum((evaluate_rt(s, state.N_Z[i])[0] - Ne[..., i, :]) ** 2, axis=-1))
                           for i in range(n)))
    out["phi"] = np.sqrt(np.sum(w * (evaluate_scalar(s, s.X, state.phi) - exact.phi(qp)) ** 2))
    return {k: float(v) for k, v in out.items()}


FIELDS = ("v", "p", "x", "N", "phi")


@dataclass
class ConvergenceTable:
    case: str
    order: int
    h: list
    errors: list  # dict per level
    iterations: list

    def orders(self, field):
        e = np.array([row[field] for row in self.errors])
        h = np.asarray(self.h)
        return list(np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:]))

    def final_order(self, field):
        return float(self.orders(field)[-1])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "h", "newton_iterations"] + [f"err_{f}" for f in FIELDS] + [f"order_{f}" for f in FIELDS])
        for lvl, (h, e, it) in enumerate(zip(self.h, self.errors, self.iterations)):
            orders = [self.orders(f)[lvl - 1] if lvl else float("nan") for f in FIELDS]
            w.writerow([lvl, f"{h:.6e}", it] + [f"{e[f]:.6e}" for f in FIELDS] + [f"{o:.4f}" for o in orders])
        return buf.getvalue()


def convergence_study(name, order, levels=3, base=4, gamma=1.0, settings=None):
    """Solve on base * 2^l crossed-free uniform meshes of the unit square and tabulate errors."""
    from .steady.newton import NewtonSettings, newton_solve

    settings = settings or NewtonSettings(tol=1e-11, max_iter=20)
    hs, errs, its = [], [], []
    for lvl in range(levels):
        nx = base * 2**lvl
        mesh = rectangle_mesh(nx, nx)
        problem, exact = manufactured_problem(name, order, mesh, gamma)
        guess = interpolate_exact(problem, exact)
        state, rep = newton_solve(guess, problem, settings)
        hs.append(1.0 / nx)
        errs.append(field_errors(state, problem, exact))
        its.append(rep.iterations)
    return ConvergenceTable(name, order, hs, errs, its)
