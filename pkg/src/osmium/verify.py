"""Independent oracles, structural checks and the linear-EOS ill-posedness toy.

The toy model is a binary mixture on the unit interval with total
concentration c_T = A + B x. Conserving the moles of both species fixes the
integrals of x and x^2, so a composition that starts uniform can never
change. ``appendix_a_evolution`` witnesses this numerically with a 1D
finite-volume diffusion model whose conservation laws are imposed through
Lagrange multipliers.
"""
from __future__ import annotations

import csv
import io
import time
import traceback
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import ConfigError
from .femcore.spaces import SpaceSetup, assemble_mass_matrix, tabulate_rt, tabulate_scalar

# ---------------------------------------------------------------------------
# linear-EOS binary mixture


@dataclass(frozen=True)
class AppendixAModel:
    """c_T = A + B x on the unit interval (nondimensional)."""

    A: float = 2.0
    B: float = 1.0

    def __post_init__(self):
        if not (self.A > 0 and self.A + self.B > 0):
            raise ConfigError("the linear EOS needs A > 0 and A + B > 0")

    def total_concentration(self, x):
        return self.A + self.B * np.asarray(x, dtype=float)

    def moles(self, x, h):
        """Integrals of c_1 = x c_T and c_2 = (1 - x) c_T for cell widths h."""
        cT = self.total_concentration(x)
        return np.array([np.sum(h * x * cT), np.sum(h * (1 - x) * cT)])


def appendix_a_volumes(A, B, x):
    """Partial molar volumes of the linear EOS and the defect |x V1 + (1-x) V2 - 1/c_T|."""
    A, B, x = (np.asarray(v, dtype=float) for v in (A, B, x))
    cT = A + B * x
    if np.any(cT <= 0):
        raise ConfigError("A + B x must be positive")
    V1 = (A + B * (2 * x - 1)) / cT**2
    V2 = (A + 2 * B * x) / cT**2
    defect = np.abs(x * V1 + (1 - x) * V2 - 1 / cT)
    return V1, V2, defect


@dataclass
class AppendixAHistory:
    """Per-step integrals of the toy model (row 0 is the initial state)."""

    A: float
    B: float
    constraints: int
    perturbation: float
    integral_x: list = field(default_factory=list)
    integral_x2: list = field(default_factory=list)
    variance: list = field(default_factory=list)
    moles: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    note: str = ""

    @property
    def max_variance(self):
        return float(max(self.variance))

    @property
    def solved(self):
        return max(self.residual) <= 1e-8

    @property
    def final_variance(self):
        return float(self.variance[-1])

    def drift(self):
        """Largest change of the integrals of x and x^2 from their initial values."""
        ix, ix2 = np.asarray(self.integral_x), np.asarray(self.integral_x2)
        return float(np.max(np.abs(ix - ix[0]))), float(np.max(np.abs(ix2 - ix2[0])))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "int_x", "int_x2", "var_x", "moles_1", "moles_2", "residual"])
        for k in range(len(self.variance)):
            m = self.moles[k]
            w.writerow([k] + [f"{v:.16e}" for v in (self.integral_x[k], self.integral_x2[k], self.variance[k], m[0], m[1],
                                                     self.residual[k])])
        return buf.getvalue()

    def summary(self):
        lines = [
            f"linear EOS c_T = {self.A:g} + {self.B:g} x, {self.constraints} conservation constraint(s), "
            f"perturbation {self.perturbation:g}",
            f"steps: {len(self.variance) - 1}; max var(x) = {self.max_variance:.3e}; "
            f"drift of int x, int x^2 = {self.drift()[0]:.3e}, {self.drift()[1]:.3e}",
        ]
        if self.note:
            lines.append(self.note)
        return "\n".join(lines)


def _laplacian_1d(m, h):
    """Cell-centred Laplacian with zero-flux ends."""
    main = np.full(m, -2.0)
    main[[0, -1]] = -1.0
    return sp.diags([np.ones(m - 1), main, np.ones(m - 1)], [-1, 0, 1]) / h**2


def appendix_a_evolution(A=2.0, B=1.0, steps=100, dt=1e-3, x0=0.4, constraints=2, perturbation=0.0, cells=64,
                         diffusivity=1.0, seed=0, tol=1e-13, max_iter=30):
    """Evolve the toy mixture with backward Euler and report var(x) per step.

    The composition obeys x_t = D x_ss + eps sin(2 pi s) + sum_k lambda_k dC_k/dx,
    where C_1 = int x c_T and C_2 = int (1 - x) c_T are the species moles and the
    multipliers lambda_k enforce C_k = C_k(0). ``constraints=1`` keeps only the
    first species' moles. ``perturbation`` sets eps, and a seeded random zero-mean
    perturbation of the same size is added to x0 when eps is nonzero.
    """
    model = AppendixAModel(A, B)
    if constraints not in (1, 2):
        raise ConfigError("constraints must be 1 or 2")
    h = 1.0 / cells
    s = (np.arange(cells) + 0.5) * h
    x = np.full(cells, float(x0))
    if perturbation:
        rng = np.random.default_rng(seed)
        bump = rng.standard_normal(cells)
        x = x + 1e-3 * perturbation * (bump - bump.mean())
    source = perturbation * np.sin(2 * np.pi * s)
    Lap = (diffusivity * _laplacian_1d(cells, h)).toarray()
    target = model.moles(x, h)[:constraints]
    hist = AppendixAHistory(A, B, constraints, perturbation)
    if B == 0:
        hist.note = ("degenerate case B = 0: c_T is constant, the two conservation laws coincide and only the "
                     "mean of x is fixed")

    def record(x, r):
        ix = float(np.sum(h * x))
        hist.integral_x.append(ix)
        hist.integral_x2.append(float(np.sum(h * x * x)))
        hist.variance.append(float(np.sum(h * (x - ix) ** 2)))
        hist.moles.append(model.moles(x, h))
        hist.residual.append(float(r))

    def grads(x):
        g1 = A + 2 * B * x  # d(x c_T)/dx
        g2 = B - A - 2 * B * x  # d((1 - x) c_T)/dx
        return np.stack([g1, g2], axis=1)[:, :constraints]

    record(x, 0.0)
    for _ in range(steps):
        x_old = x.copy()
        lam = np.zeros(constraints)
        r = np.inf
        for _ in range(max_iter):
            G = grads(x)
            Rx = (x - x_old) / dt - Lap @ x - source - G @ lam
            Rc = model.moles(x, h)[:constraints] - target
            R = np.concatenate([Rx, Rc])
            r = float(np.linalg.norm(R))
            if r <= tol:
                break
            dG = np.array([2 * B, -2 * B])[:constraints]
            Jxx = np.eye(cells) * (1 / dt - float(dG @ lam)) - Lap
            J = np.block([[Jxx, -G], [h * G.T, np.zeros((constraints, constraints))]])
            # minimum-norm solve: the constraint gradients are parallel for uniform x
            d = scipy.linalg.lstsq(J, -R, lapack_driver="gelsd")[0]
            x = x + d[:cells]
            lam = lam + d[cells:]
        record(x, r)
    if max(hist.residual) > 1e-8:
        hist.note = (hist.note + "; " if hist.note else "") + (
            f"the step equations have no solution (largest residual {max(hist.residual):.2e}): "
            "the conserved integrals forbid any change of a uniform composition")
    return hist


# ---------------------------------------------------------------------------
# discrete structure


def divergence_inclusion(setup: SpaceSetup):
    """max |div N - Pi div N| / max |div N| over RT basis functions, Pi the DG L2 projection."""
    _, div = tabulate_rt(setup)
    Xval, _ = tabulate_scalar(setup, setup.X)
    w = setup.dx
    Mloc = np.einsum("tq,qa,qb->tab", w, Xval, Xval)
    rhs = np.einsum("tq,qa,tqb->tab", w, Xval, div)
    coef = np.linalg.solve(Mloc, rhs)
    proj = np.einsum("qa,tab->tqb", Xval, coef)
    return float(np.max(np.abs(div - proj)) / np.max(np.abs(div)))


def _smallest_gen_singular(B, A, Mq, drop_constants=False, q_ones=None):
    """sqrt of the smallest eigenvalue of B A^-1 B^T = beta^2 Mq on the relevant subspace."""
    A, B, Mq = (m.toarray() if sp.issparse(m) else np.asarray(m) for m in (A, B, Mq))
    S = B @ np.linalg.solve(A, B.T)
    if drop_constants:
        # restrict to Mq-orthogonal complement of constants
        u = Mq @ q_ones
        Q = scipy.linalg.null_space(u[None, :])
        S = Q.T @ S @ Q
        Mq = Q.T @ Mq @ Q
    ev = scipy.linalg.eigh(0.5 * (S + S.T), 0.5 * (Mq + Mq.T), eigvals_only=True)
    return float(np.sqrt(max(ev[0], 0.0)))


def inf_sup_stokes(setup: SpaceSetup):
    """Discrete inf-sup constant of (div v, q) with zero-trace velocities and zero-mean pressures."""
    Vval, Vgrad = tabulate_scalar(setup, setup.V)
    Pval, _ = tabulate_scalar(setup, setup.P)
    w = setup.dx
    nv = setup.V.ndofs
    interior = np.setdiff1d(np.arange(nv), setup.V.boundary_dofs)
    K = np.einsum("tq,tqad,tqbd->tab", w, Vgrad, Vgrad)
    rows = np.repeat(setup.V.cell_dofs, Vval.shape[1], axis=1).ravel()
    cols = np.tile(setup.V.cell_dofs, (1, Vval.shape[1])).ravel()
    Ks = sp.coo_matrix((K.ravel(), (rows, cols)), shape=(nv, nv)).tocsr()[interior][:, interior]
    A = sp.block_diag([Ks, Ks])
    blocks = []
    for c in range(2):
        loc = np.einsum("tq,qa,tqb->tab", w, Pval, Vgrad[..., c])
        r = np.repeat(setup.P.cell_dofs, Vval.shape[1], axis=1).ravel()
        cc = np.tile(setup.V.cell_dofs, (1, Pval.shape[1])).ravel()
        Bc = sp.coo_matrix((loc.ravel(), (r, cc)), shape=(setup.P.ndofs, nv)).tocsr()[:, interior]
        blocks.append(Bc)
    B = sp.hstack(blocks)
    Mp = assemble_mass_matrix(setup, setup.P)
    return _smallest_gen_singular(B, A, Mp, drop_constants=True, q_ones=np.ones(setup.P.ndofs))


def inf_sup_flux(setup: SpaceSetup):
    """Discrete inf-sup constant of (div N, y) in H(div) x L2 (natural flux conditions)."""
    from .femcore.spaces import divergence_matrix

    _, div = tabulate_rt(setup)
    Mn = assemble_mass_matrix(setup, setup.N)
    loc = np.einsum("tq,tqa,tqb->tab", setup.dx, div, div)
    cd = setup.N.cell_dofs
    nb = cd.shape[1]
    Dd = sp.coo_matrix(
        (loc.ravel(), (np.repeat(cd, nb, axis=1).ravel(), np.tile(cd, (1, nb)).ravel())),
        shape=(setup.N.ndofs,) * 2,
    )
    A = Mn + Dd
    B = divergence_matrix(setup)
    My = assemble_mass_matrix(setup, setup.X)
    return _smallest_gen_singular(B, A, My)


def constant_test_identities(state, problem):
    """Defects of the constant-test-function identities of the steady residual.

    Summing the mass-average rows (test q = 1) leaves only the multiplier term,
    and summing a continuity row group (test y = 1) leaves the boundary flux
    minus the source integral plus the multiplier term. Returns relative
    defects per row group, keyed "mavg", "cont:<i>" and "cont:J".
    """
    from .steady.assembly import _rt_at, get_assembler

    asm = get_assembler(problem)
    U = asm.extend(state)
    R = asm.residual(U)[: asm.size]
    L, s, n = problem.layout, problem.setup, problem.n
    area = asm.area
    lam = {}
    k = 0
    for slot in problem.constraints.slots:
        if slot is not None:
            lam[slot] = state.multipliers[k]
            k += 1
    # boundary fluxes int_dOmega N_i . n from boundary quadrature
    cells, local, ref, w, phys, normals, idx = problem.boundary
    Nc = state.N_Z.reshape(n, -1)
    flux = np.zeros(n)
    for b in range(len(idx)):
        phi = _rt_at(s, cells[b], ref[b])  # (q, a, 2)
        vals = np.einsum("qac,ia->iqc", phi, Nc[:, s.N.cell_dofs[cells[b]]])
        flux += np.einsum("q,iqc,c->i", w[b], vals, normals[b])
    src = np.zeros(n)
    if problem.sources is not None:
        src = np.einsum("tq,tqi->i", s.dx, np.asarray(problem.sources(s.quad_points)[1]))
    out = {}
    rp = R[L.block("p")]
    out["mavg"] = abs(rp.sum() - lam.get("mavg", 0.0) * area) / max(np.abs(rp).max(), 1.0)
    for i in range(n):
        name = "cont:J" if i == n - 1 else f"cont:{i}"
        blk = L.block("phi") if i == n - 1 else L.x_index(i, np.arange(s.X.ndofs))
        r = R[blk]
        scale = -problem.basis.znorm if i == n - 1 else 1.0
        expect = scale * (flux[i] - src[i]) + lam.get(name, 0.0) * area
        out[name] = abs(r.sum() - expect) / max(np.abs(r).max(), 1.0)
    return out


# ---------------------------------------------------------------------------
# invariant suite


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    seconds: float
    detail: str = ""


CHECKS = {}


def register_check(name, tolerance):
    def deco(fn):
        CHECKS[name] = (fn, tolerance)
        return fn

    return deco


def _three_ion_system():
    from .species import Species, validate_system

    return validate_system([Species("S", 0.1, 0), Species("A", 0.007, 1), Species("B", 0.145, -1)])


_CHARGES = {3: (0, 1, -1), 4: (0, 0, 1, -1), 5: (0, 1, -1, 2, -2)}


def _random_system(rng, n):
    from .species import Species, validate_system

    return validate_system([Species(f"s{i}", float(rng.uniform(0.005, 0.2)), z) for i, z in enumerate(_CHARGES[n])])


@register_check("transform_roundtrip", 1e-12)
def _check_roundtrip(rng, hooks):
    from .saltcharge import build_transform, from_transformed, to_transformed

    worst = 0.0
    for n in (3, 4, 5):
        basis = hooks.get("basis", lambda b: b)(build_transform(_random_system(rng, n)))
        for _ in range(20):
            w = rng.standard_normal(n)
            back = from_transformed(basis, to_transformed(basis, w))
            worst = max(worst, float(np.linalg.norm(back - w) / np.linalg.norm(w)))
            worst = max(worst, float(np.linalg.norm(basis.Z.T @ basis.Z_invT - np.eye(n))))
    return worst


@register_check("transport_kernel", 1e-12)
def _check_kernel(rng, hooks):
    from .transport import assemble_M

    worst = 0.0
    system = _three_ion_system()
    for _ in range(20):
        c = rng.uniform(0.1, 10.0, system.n)
        D = rng.uniform(0.5, 2.0, (3, 3))
        D = 0.5 * (D + D.T)
        M = assemble_M(system, D, c, 298.15)
        worst = max(worst, float(np.linalg.norm(M @ c) / (np.linalg.norm(M) * np.linalg.norm(c))))
    return worst


@register_check("eos_identity", 1e-10)
def _check_eos(rng, hooks):
    from .species import ThermodynamicState
    from .thermo import eos_identity_defect

    worst = 0.0
    for eos in bundled_eos():
        for _ in range(10):
            x = rng.uniform(0.02, 0.2, 2)
            x[0] = 1 - x[1] * eos_nu(eos)[1]
            worst = max(worst, eos_identity_defect(eos, ThermodynamicState(298.15, float(rng.uniform(-1e5, 1e5)), x)))
    return worst


@register_check("ideal_factors_fd", 1e-6)
def _check_factors(rng, hooks):
    import jax.numpy as jnp

    from .thermo import ideal_factors, ideal_potential

    nu = jnp.asarray([[1.0, 0, 0], [0, 1, 1]])
    worst = 0.0
    for _ in range(10):
        x = np.array([rng.uniform(0.5, 0.9), 0.0])
        x[1] = (1 - x[0]) / 2
        X = np.asarray(ideal_factors(nu, jnp.asarray(x)))
        h = 1e-6
        fd = np.stack([(np.asarray(ideal_potential(nu, jnp.asarray(x + h * e)))
                        - np.asarray(ideal_potential(nu, jnp.asarray(x - h * e)))) / (2 * h) for e in np.eye(2)], 1)
        worst = max(worst, float(np.max(np.abs(fd - X)) / np.max(np.abs(X))))
    return worst


@register_check("quadrature_exactness", 1e-13)
def _check_quadrature(rng, hooks):
    from math import factorial

    from .femcore.quadrature import interval_rule, triangle_rule

    worst = 0.0
    for deg in range(1, 9):
        rule = triangle_rule(deg)
        for a in range(deg + 1):
            b = deg - a
            exact = factorial(a) * factorial(b) / factorial(a + b + 2)
            approx = float(np.sum(rule.weights * rule.points[:, 0] ** a * rule.points[:, 1] ** b))
            worst = max(worst, abs(approx - exact) / exact)
        r1 = interval_rule(deg)
        worst = max(worst, abs(float(np.sum(r1.weights * r1.points[:, 0] ** deg)) - 1 / (deg + 1)))
    return worst


@register_check("divergence_inclusion", 1e-13)
def _check_div(rng, hooks):
    from .femcore import build_spaces, rectangle_mesh

    mesh = rectangle_mesh(3, 3, diagonal="crossed")
    return max(divergence_inclusion(build_spaces(mesh, k)) for k in (1, 2))


@register_check("inf_sup_stokes", -1e-3)
def _check_infsup_stokes(rng, hooks):
    from .femcore import build_spaces, rectangle_mesh

    return min(inf_sup_stokes(build_spaces(rectangle_mesh(8, 8, diagonal="crossed"), k)) for k in (1, 2))


@register_check("inf_sup_flux", -1e-3)
def _check_infsup_flux(rng, hooks):
    from .femcore import build_spaces, rectangle_mesh

    return min(inf_sup_flux(build_spaces(rectangle_mesh(8, 8, diagonal="crossed"), k)) for k in (1, 2))


@register_check("jacobian_fd", 1e-5)
def _check_jacobian(rng, hooks):
    from .steady.assembly import fd_check

    problem, state = fd_fixture(seed=int(rng.integers(1 << 30)))
    return fd_check(state, problem, seed=1)


@register_check("appendix_a_volumes", 1e-13)
def _check_appendix(rng, hooks):
    A = rng.uniform(0.5, 3.0, 1000)
    B = rng.uniform(-0.4, 1.0, 1000) * A
    x = rng.uniform(0, 1, 1000)
    return float(np.max(appendix_a_volumes(A, B, x)[2]))


def bundled_eos():
    """One instance of every bundled equation of state, on the 3-species test basis."""
    from .saltcharge import build_transform
    from .thermo import CompressibleEOS, ConcentrationPolynomialEOS, ConstantVolumeEOS, DensityPolynomialEOS

    basis = build_transform(_three_ion_system())
    masses = basis.salt_molar_masses
    return [
        ConstantVolumeEOS((1e-4, 6e-5), basis.nu_Z),
        DensityPolynomialEOS((1006.0, 2600.0), 1, masses, basis.nu_Z),
        ConcentrationPolynomialEOS((1e4, -2e3), 1, basis.nu_Z),
        CompressibleEOS(ConstantVolumeEOS((1e-4, 6e-5), basis.nu_Z), 1e-9),
    ]


def eos_nu(eos):
    return np.asarray(eos.nu_Z, dtype=float)


def fd_fixture(seed=0, cells="two"):
    """Small problem with a Butler-Volmer electrode and a leak, plus a random interior state."""
    from .femcore import Mesh2D, build_spaces
    from .saltcharge import build_transform
    from .steady.constraints import analyze_constraints
    from .steady.problem import (BoundaryConditionSet, LeakProfile, LinearButlerVolmer, Problem,
                                 ProportionalToCurrent, TagBC, TanhButlerVolmer, ZeroCurrent, ZeroFlux)
    from .thermo import ConstantViscosity, DensityPolynomialEOS, MaterialModel
    from .transport import ConstantDiffusivity

    rng = np.random.default_rng(seed)
    system = _three_ion_system()
    basis = build_transform(system)
    mesh = Mesh2D(
        np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
        np.array([[0, 1, 2], [0, 2, 3]]),
        np.array([[0, 1], [1, 2], [2, 3], [3, 0]]),
        ("wall", "right", "wall", "left"),
    )
    eos = DensityPolynomialEOS((1006.0, 2600.0), 1, basis.salt_molar_masses, basis.nu_Z)
    D = np.array([[1, 3, 3], [3, 1, 1.5], [3, 1.5, 1]]) * 1e-10
    mat = MaterialModel(eos, ConstantDiffusivity(D), ConstantViscosity(1e-3, 1e-6))
    bcs = BoundaryConditionSet({
        "left": TagBC((LeakProfile(), ProportionalToCurrent(0.5)), TanhButlerVolmer(2.0, 0.075, 0.5, 1, 0.5)),
        "right": TagBC((ZeroFlux(), ProportionalToCurrent(0.5)), LinearButlerVolmer(1.5, 1.0, 0.0)),
        "wall": TagBC((ZeroFlux(), ZeroFlux()), ZeroCurrent()),
    })
    an = analyze_constraints(basis, bcs, "composition", "transient")
    problem = Problem(build_spaces(mesh, 1), basis, mat, bcs, an.constraints)
    state = problem.uniform_state([0.85, 0.075])
    L = problem.layout
    vec = state.vec
    x_blk = np.zeros(L.size, dtype=bool)
    x_blk[L.block("x")] = True
    noise = rng.standard_normal(L.size)
    vec[~x_blk] = 0.1 * noise[~x_blk]
    vec[x_blk] += 0.005 * noise[x_blk]
    return problem, state


def invariant_suite(checks=None, seed=0, hooks=None):
    """Run the registered checks; failures and exceptions become report rows.

    ``hooks`` maps object names to callables that replace them before a check
    runs (``"basis"`` receives each SaltChargeBasis), used to inject faults.
    A negative tolerance means the value must exceed ``-tolerance``.
    """
    hooks = dict(hooks or {})
    names = list(CHECKS) if checks is None else list(checks)
    out = []
    for name in names:
        fn, tol = CHECKS[name]
        rng = np.random.default_rng([seed, len(name)])
        t0 = time.perf_counter()
        try:
            value = float(fn(rng, hooks))
            passed = value >= -tol if tol < 0 else value <= tol
            detail = ""
        except Exception as exc:  # reported, not raised
            value, passed = float("nan"), False
            detail = f"{type(exc).__name__}: {exc}".splitlines()[0]
            if hooks.get("traceback"):
                detail += "\n" + traceback.format_exc()
        out.append(CheckResult(name, bool(passed), value, abs(tol), time.perf_counter() - t0, detail))
    return out


def report_csv(results):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["check", "passed", "value", "tolerance", "seconds", "detail"])
    for r in results:
        w.writerow([r.name, int(r.passed), f"{r.value:.6e}", f"{r.tolerance:.1e}", f"{r.seconds:.3f}", r.detail])
    return buf.getvalue()


def report_text(results):
    lines = []
    for r in results:
        tag = "PASS" if r.passed else "FAIL"
        lines.append(f"{tag}  {r.name:<24s} value={r.value:.3e} tol={r.tolerance:.1e} ({r.seconds:.2f}s) {r.detail}")
    n_ok = sum(r.passed for r in results)
    lines.append(f"{n_ok}/{len(results)} checks passed")
    return "\n".join(lines)
