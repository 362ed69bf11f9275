"""Per-cell and per-boundary-edge residual kernels written in JAX.

Local unknown vector of a cell, in order: velocity (2, aV), pressure (aP),
transformed fluxes (n, aN), salt mole fractions (n-1, aX), potential (aX),
CG1 reconstruction values of the mole fractions (n-1, 3).
"""
from __future__ import annotations

from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np

from ..transport import onsager_matrix

# boundary condition codes used inside the boundary kernel
SALT_ZERO, SALT_GIVEN, SALT_LEAK, SALT_PROP, SALT_WEAK = range(5)
CUR_ZERO, CUR_GIVEN, CUR_LINEAR_BV, CUR_TANH_BV, CUR_PROP = range(5)


@dataclass(frozen=True)
class LocalSizes:
    aV: int
    aP: int
    aN: int
    aX: int
    n: int
    aR: int = 3

    @property
    def slices(self):
        out = {}
        pos = 0
        for name, size in (
            ("v", 2 * self.aV),
            ("p", self.aP),
            ("N", self.n * self.aN),
            ("x", (self.n - 1) * self.aX),
            ("phi", self.aX),
            ("xi", (self.n - 1) * self.aR),
        ):
            out[name] = slice(pos, pos + size)
            pos += size
        out["total"] = pos
        return out

    @property
    def n_in(self):
        return self.slices["total"]

    @property
    def n_out(self):
        """Field residual rows of a cell (no reconstruction rows)."""
        return self.slices["xi"].start

    def unpack(self, loc):
        s = self.slices
        n = self.n
        return (
            loc[s["v"]].reshape(2, self.aV),
            loc[s["p"]],
            loc[s["N"]].reshape(n, self.aN),
            loc[s["x"]].reshape(n - 1, self.aX),
            loc[s["phi"]],
            loc[s["xi"]].reshape(n - 1, self.aR),
        )


def make_props(problem):
    """Nondimensional constitutive evaluator props(x_nu, p) -> dict."""
    basis, mat, sc = problem.basis, problem.material, problem.scales
    Z = jnp.asarray(basis.Z)
    nu = jnp.asarray(basis.Z[:-1])
    m = jnp.asarray(basis.system.molar_masses)
    Zm = Z @ m
    T, P, cref, Dref = sc.T, sc.P, sc.c_ref, sc.D_ref
    gamma = float(problem.gamma)
    eta_scale = Dref / (sc.L**2 * cref * sc.RT)
    rho_mom = sc.U**2 / P

    def props(xt, pt):
        p = pt * P
        cT = mat.eos.total_concentration(T, p, xt)
        xp = nu.T @ xt
        rho = cT * jnp.dot(m, xp)
        psi = Zm / rho * cref
        V = jnp.asarray(mat.eos.partial_molar_volumes(T, p, xt)) * cref
        X = mat.factors(nu, T, p, xt)
        D = mat.diffusivities(T, p, xt) / Dref
        M = onsager_matrix(D, cT * xp / cref, 1.0)
        MZ = Z @ M @ Z.T
        Mg = gamma * jnp.outer(psi, psi) + 0.5 * (MZ + MZ.T)
        eta, zeta = mat.viscosity(T, p, xt)
        return {
            "rho_m": rho * rho_mom,
            "rho": rho,
            "psi": psi,
            "V": V,
            "X": X,
            "Mg": Mg,
            "eta": eta * eta_scale,
            "zeta": zeta * eta_scale,
            "cT": cT / cref,
        }

    return props


def _reconstructed(sizes, nu_Z, Rval, Rgrad, xi):
    """Normalized reconstruction x~ (q, n-1) and gradient (q, n-1, 2)."""
    xq = Rval @ xi.T
    gq = jnp.einsum("qad,ia->qid", Rgrad, xi)
    s = xq @ nu_Z
    xt = xq / s[:, None]
    gs = jnp.einsum("qid,i->qd", gq, nu_Z)
    gxt = (gq - xt[:, :, None] * gs[:, None, :]) / s[:, None, None]
    return xt, gxt


def make_cell_kernel(problem, sizes: LocalSizes, shared):
    """Cell residual: loc (n_in,), data -> (n_out + n, ) with cell integrals appended."""
    props = make_props(problem)
    n = sizes.n
    nu_Z = jnp.asarray(problem.basis.nu_Z)
    znorm = float(problem.basis.znorm)
    gamma = float(problem.gamma)
    frozen = bool(problem.frozen)
    Vval = jnp.asarray(shared["Vval"])
    Pval = jnp.asarray(shared["Pval"])
    Xval = jnp.asarray(shared["Xval"])
    Rval = jnp.asarray(shared["Rval"])
    eye2 = jnp.eye(2)

    def coef(xt, pt):
        pr = props(xt, pt)
        return pr["psi"], pr["V"], pr["X"]

    def point(xt, gxt, pt, gpt):
        if frozen:
            xt, gxt, pt, gpt = (jax.lax.stop_gradient(a) for a in (xt, gxt, pt, gpt))
        pr = props(xt, pt)
        grads = [jax.jvp(coef, (xt, pt), (gxt[:, d], gpt[d]))[1] for d in range(2)]
        gpsi = jnp.stack([g[0] for g in grads], axis=-1)  # (n, 2)
        gV = jnp.stack([g[1] for g in grads], axis=-1)  # (n-1, 2)
        gX = jnp.stack([g[2] for g in grads], axis=-1)  # (n-1, n-1, 2)
        return pr, gpsi, gV, gX

    def kernel(loc, d):
        v, p, N, x, phi, xi = sizes.unpack(loc)
        w = d["w"]
        Vg, Pg, Nv, Nd, Rg = d["Vgrad"], d["Pgrad"], d["Nval"], d["Ndiv"], d["Rgrad"]
        xt, gxt = _reconstructed(sizes, nu_Z, Rval, Rg, xi)
        pt = Pval @ p
        gpt = jnp.einsum("qad,a->qd", Pg, p)
        pr, gpsi, gV, gX = jax.vmap(point)(xt, gxt, pt, gpt)

        vq = Vval @ v.T  # (q, 2)
        gv = jnp.einsum("qad,ca->qcd", Vg, v)  # (q, c, d)
        Nq = jnp.einsum("qac,ia->qic", Nv, N)  # (q, n, 2)
        divN = jnp.einsum("qa,ia->qi", Nd, N)  # (q, n)
        xq = Xval @ x.T  # (q, n-1)
        phiq = Xval @ phi
        ph = Pval @ p

        psi = pr["psi"]  # (q, n)
        psiN = jnp.einsum("qi,qic->qc", psi, Nq)
        slip = vq - psiN
        divv = gv[:, 0, 0] + gv[:, 1, 1]
        eps = 0.5 * (gv + jnp.swapaxes(gv, 1, 2))
        tau = 2 * pr["eta"][:, None, None] * eps + ((pr["zeta"] - pr["eta"]) * divv)[:, None, None] * eye2
        f = d["f"]
        rho_m = pr["rho_m"]
        # momentum
        conv = rho_m[:, None, None] * vq[:, :, None] * vq[:, None, :]  # (q, c, d)
        pointwise = gamma * slip - rho_m[:, None] * f - d["src_v"]  # (q, c)
        Rv = (
            -jnp.einsum("q,qcd,qad->ca", w, conv, Vg)
            + jnp.einsum("q,qc,qa->ca", w, pointwise, Vval)
            - jnp.einsum("q,q,qac->ca", w, ph, Vg)
            + jnp.einsum("q,qcd,qad->ca", w, tau, Vg)
        )
        # mass-average in gradient form
        Rp = jnp.einsum("q,qc,qac->a", w, slip, Pg)
        # transformed OSM
        MN = jnp.einsum("qij,qjc->qic", pr["Mg"], Nq)
        gpv = gamma * psi[:, :, None] * vq[:, None, :]
        Rn = jnp.einsum("q,qic,qac->ia", w, MN - gpv, Nv)
        Rn = Rn + jnp.einsum("q,q,qi,qa->ia", w, ph, psi, Nd) + jnp.einsum("q,q,qic,qac->ia", w, ph, gpsi, Nv)
        salt = (
            -jnp.einsum("q,q,qi,qa->ia", w, ph, pr["V"], Nd)
            - jnp.einsum("q,q,qic,qac->ia", w, ph, gV, Nv)
            - jnp.einsum("q,qk,qki,qa->ia", w, xq, pr["X"], Nd)
            - jnp.einsum("q,qk,qkic,qac->ia", w, xq, gX, Nv)
        )
        Rn = Rn.at[: n - 1].add(salt)
        Rn = Rn.at[n - 1].add(-znorm * jnp.einsum("q,q,qa->a", w, phiq, Nd))
        # continuity
        res = divN - d["src_c"]
        Rx = jnp.einsum("q,qi,qa->ia", w, res[:, : n - 1], Xval)
        Rphi = -znorm * jnp.einsum("q,q,qa->a", w, res[:, n - 1], Xval)
        moles = jnp.einsum("q,q,qi->i", w, pr["cT"], xt)
        mass = jnp.einsum("q,q->", w, pr["rho"])
        return jnp.concatenate([Rv.ravel(), Rp, Rn.ravel(), Rx.ravel(), Rphi, moles, mass[None]])

    return kernel


def make_mass_kernel(problem, sizes: LocalSizes, shared):
    """Time-derivative quantities: (rho~ v, u) and (c~_nu, y)."""
    props = make_props(problem)
    nu_Z = jnp.asarray(problem.basis.nu_Z)
    Vval = jnp.asarray(shared["Vval"])
    Pval = jnp.asarray(shared["Pval"])
    Xval = jnp.asarray(shared["Xval"])
    Rval = jnp.asarray(shared["Rval"])

    def kernel(loc, d):
        v, p, N, x, phi, xi = sizes.unpack(loc)
        w = d["w"]
        xt, _ = _reconstructed(sizes, nu_Z, Rval, d["Rgrad"], xi)
        pt = Pval @ p
        pr = jax.vmap(props)(xt, pt)
        vq = Vval @ v.T
        gv = jnp.einsum("q,q,qc,qa->ca", w, pr["rho_m"], vq, Vval)
        gx = jnp.einsum("q,q,qi,qa->ia", w, pr["cT"], xt, Xval)
        return jnp.concatenate([gv.ravel(), gx.ravel()])

    return kernel


def make_boundary_kernel(problem, sizes: LocalSizes):
    """Boundary-edge kernel: strong-row residuals and weak boundary terms.

    Input is the adjacent cell's local vector followed by the leak amplitude.
    Output: velocity strong rows (2, aV), flux strong rows (n, aN), weak
    additions to flux rows (n, aN).
    """
    props = make_props(problem)
    n = sizes.n
    nu = jnp.asarray(problem.basis.Z[:-1])
    nu_Z = jnp.asarray(problem.basis.nu_Z)
    znorm = float(problem.basis.znorm)

    def kernel(loc, d):
        v, p, N, x, phi, xi = sizes.unpack(loc[:-1])
        lam = loc[-1]
        w = d["w"]
        nrm = d["normal"]
        xq = d["Rval"] @ xi.T
        xt = xq / (xq @ nu_Z)[:, None]
        pt = d["Pval"] @ p
        pr = jax.vmap(props)(xt, pt)
        vq = d["Vval"] @ v.T
        Nq = jnp.einsum("qac,ia->qic", d["Nval"], N)
        Nn = Nq @ nrm  # (q, n)
        phin = d["Nval"] @ nrm  # (q, aN)
        phiq = d["Xval"] @ phi
        Jn = znorm * Nn[:, n - 1]

        # current data
        code = d["cur_code"]
        par = d["cur_par"]  # i0, alpha_sum or x_ref, V_e, s, factor
        sidx = d["cur_salt"]
        xs = jnp.where(code == CUR_TANH_BV, xt[:, sidx], 0.5)
        xphys = jnp.where(code == CUR_TANH_BV, (nu.T @ xt.T).T, 0.5)
        mu_s = jnp.log(xphys) @ nu[sidx] + pr["V"][:, sidx] * pt
        g_lin = -par[0] * par[1] * (par[2] - phiq)
        g_tanh = -2 * par[0] * (xs / par[1]) ** 2 * jnp.tanh(par[2] - phiq + par[3] * mu_s)
        g_prop = par[4] * Nn[:, sidx]
        gJ = jnp.select(
            [code == CUR_GIVEN, code == CUR_LINEAR_BV, code == CUR_TANH_BV, code == CUR_PROP],
            [d["given_J"], g_lin, g_tanh, g_prop],
            jnp.zeros_like(g_lin),
        )
        # salt data
        scode = d["salt_code"]  # (n-1,)
        gs = jnp.where(scode[None] == SALT_GIVEN, d["given_salt"], 0.0)
        gs = gs + jnp.where(scode[None] == SALT_LEAK, lam * d["qp"][:, None], 0.0)
        gs = gs + jnp.where(scode[None] == SALT_PROP, d["salt_alpha"][None] * Jn[:, None], 0.0)
        g = jnp.concatenate([gs, (gJ / znorm)[:, None]], axis=1)  # (q, n)
        SN = jnp.einsum("q,qi,qa->ia", w, Nn - g, phin)
        # velocity trace: v = [(psi~^T N) . n] n + g_par
        psiNn = jnp.einsum("qi,qi->q", pr["psi"], Nn)
        G = psiNn[:, None] * nrm[None] + d["gpar"]
        Sv = jnp.einsum("q,qc,qa->ca", w, vq - G, d["Vval"])
        # weak composition terms
        Xd = jnp.diagonal(pr["X"], axis1=1, axis2=2)  # (q, n-1)
        weak = jnp.where(scode == SALT_WEAK, d["weak_x"], 0.0)
        WN = jnp.einsum("q,i,qi,qa->ia", w, weak, Xd, phin)
        WN = jnp.concatenate([WN, jnp.zeros((1, sizes.aN))], axis=0)
        return jnp.concatenate([Sv.ravel(), SN.ravel(), WN.ravel()])

    return kernel


def local_value_and_jacobian(kernel):
    """Vectorized (values, Jacobians) over cells, compiled once."""
    jac = jax.jacfwd(kernel, argnums=0)

    @jax.jit
    def run(loc, data):
        return jax.vmap(kernel)(loc, data), jax.vmap(jac)(loc, data)

    return run


def local_value(kernel):
    return jax.jit(jax.vmap(kernel))


def as_numpy(tree):
    return jax.tree_util.tree_map(np.asarray, tree)
