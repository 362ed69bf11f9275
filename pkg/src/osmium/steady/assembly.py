"""Global assembly of residuals and exact Jacobians.

Newton works on an extended vector [u; xi] where xi holds CG1 reconstructions
of the salt mole fractions, tied to u by the linear rows M1 xi - B x = 0. The
public functions below eliminate xi and expose the reduced residual and the
exact reduced Jacobian.
"""
from __future__ import annotations

import inspect
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from ..errors import DomainError
from ..femcore.spaces import reconstruct, tabulate_rt, tabulate_scalar
from . import kernels as K
from .problem import (
    ConstraintSet,
    DiscreteState,
    GivenCurrent,
    GivenFlux,
    LeakProfile,
    LinearButlerVolmer,
    MeanPotential,
    MeanPressure,
    Normalization,
    Problem,
    ProportionalToCurrent,
    ProportionalToSaltFlux,
    TanhButlerVolmer,
    TotalMass,
    TotalMoles,
    WeakDirichlet,
)


def _leak_profile(mesh, tag, pts):
    """4 tau (1 - tau) with tau the arclength fraction along the tagged polyline."""
    ids = mesh.tagged(tag)
    edges = mesh.boundary_edges[ids]
    deg = {}
    for a, b in edges:
        deg[a] = deg.get(a, 0) + 1
        deg[b] = deg.get(b, 0) + 1
    ends = [v for v, c in deg.items() if c == 1]
    start = min(ends) if ends else int(edges[0, 0])
    adj = {}
    for k, (a, b) in enumerate(edges):
        adj.setdefault(a, []).append((k, b))
        adj.setdefault(b, []).append((k, a))
    order, cur, seen = [], start, set()
    while True:
        nxt = [(k, o) for k, o in adj[cur] if k not in seen]
        if not nxt:
            break
        k, o = nxt[0]
        seen.add(k)
        order.append((k, cur, o))
        cur = o
    V = mesh.vertices
    lengths = np.array([np.linalg.norm(V[o] - V[a]) for _, a, o in order])
    total = lengths.sum()
    cum = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
    prof = {}
    for (k, a, o), c0 in zip(order, cum):
        d = np.linalg.norm(pts[k] - V[a], axis=-1)
        tau = (c0 + d) / total
        prof[ids[k]] = 4 * tau * (1 - tau)
    return prof


class Assembler:
    """Caches index maps, tabulations and compiled kernels for one problem."""

    def __init__(self, problem: Problem):
        self.problem = problem
        s = problem.setup
        self.setup = s
        self.n = problem.n
        self.layout = problem.layout
        self.sizes = K.LocalSizes(s.V.element.dim, s.P.element.dim, s.N.element.dim, s.X.element.dim, self.n)
        self.nR = s.R.ndofs
        self.size = self.layout.size
        self.ext_size = self.size + (self.n - 1) * self.nR

    # ------------------------------------------------------------------ maps
    @cached_property
    def cell_index(self):
        s, L, n = self.setup, self.layout, self.n
        cols = [L.v_index(c, s.V.cell_dofs) for c in range(2)]
        cols.append(L.offsets["p"][0] + s.P.cell_dofs)
        cols += [L.N_index(i, s.N.cell_dofs) for i in range(n)]
        cols += [L.x_index(i, s.X.cell_dofs) for i in range(n - 1)]
        cols.append(L.offsets["phi"][0] + s.X.cell_dofs)
        cols += [self.size + i * self.nR + s.R.cell_dofs for i in range(n - 1)]
        return np.concatenate(cols, axis=1)

    @cached_property
    def shared(self):
        s = self.setup
        Vval, _ = tabulate_scalar(s, s.V)
        Pval, _ = tabulate_scalar(s, s.P)
        Xval, _ = tabulate_scalar(s, s.X)
        Rval, _ = tabulate_scalar(s, s.R)
        return {"Vval": Vval, "Pval": Pval, "Xval": Xval, "Rval": Rval}

    @cached_property
    def cell_data(self):
        s, pb = self.setup, self.problem
        _, Vg = tabulate_scalar(s, s.V)
        _, Pg = tabulate_scalar(s, s.P)
        _, Rg = tabulate_scalar(s, s.R)
        Nv, Nd = tabulate_rt(s)
        pts = s.quad_points
        nt, q = s.dx.shape
        if callable(pb.forcing):
            f = np.asarray(pb.forcing(pts), dtype=float)
        else:
            f = np.broadcast_to(np.asarray(pb.forcing, dtype=float), (nt, q, 2)).copy()
        if pb.sources is not None:
            sv, sc = pb.sources(pts)
            sv, sc = np.asarray(sv, dtype=float), np.asarray(sc, dtype=float)
        else:
            sv, sc = np.zeros((nt, q, 2)), np.zeros((nt, q, self.n))
        return {"w": s.dx, "Vgrad": Vg, "Pgrad": Pg, "Nval": Nv, "Ndiv": Nd, "Rgrad": Rg, "f": f, "src_v": sv, "src_c": sc}

    @cached_property
    def boundary_data(self):
        s, pb, n = self.setup, self.problem, self.n
        mesh = s.mesh
        cells, local, ref, w, phys, normals, idx = pb.boundary
        nb, q = w.shape
        Vval = np.stack([s.V.element.tabulate(r)[0] for r in ref])
        Pval = np.stack([s.P.element.tabulate(r)[0] for r in ref])
        Xval = np.stack([s.X.element.tabulate(r)[0] for r in ref])
        Rval = np.stack([s.R.element.tabulate(r)[0] for r in ref])
        Nval = np.stack([_rt_at(s, c, r) for r, c in zip(ref, cells)]) if nb else np.zeros((0, q, s.N.element.dim, 2))
        salt_code = np.zeros((nb, n - 1), dtype=np.int32)
        salt_alpha = np.zeros((nb, n - 1))
        weak_x = np.zeros((nb, n - 1))
        given_salt = np.zeros((nb, q, n - 1))
        cur_code = np.zeros(nb, dtype=np.int32)
        cur_par = np.zeros((nb, 5))
        cur_salt = np.zeros(nb, dtype=np.int32)
        given_J = np.zeros((nb, q))
        gpar = np.zeros((nb, q, 2))
        qp = np.zeros((nb, q))
        leak_tag = pb.bcs.leak_tag
        prof = _leak_profile(mesh, leak_tag, phys) if leak_tag is not None else {}
        for b in range(nb):
            tag = mesh.boundary_tags[idx[b]]
            bc = pb.bcs.tags[tag]
            for i, sbc in enumerate(bc.salts):
                if isinstance(sbc, GivenFlux):
                    salt_code[b, i] = K.SALT_GIVEN
                    given_salt[b, :, i] = _data(sbc.value, phys[b], normals[b])
                elif isinstance(sbc, LeakProfile):
                    salt_code[b, i] = K.SALT_LEAK
                    qp[b] = prof[idx[b]]
                elif isinstance(sbc, ProportionalToCurrent):
                    salt_code[b, i] = K.SALT_PROP
                    salt_alpha[b, i] = sbc.alpha
                elif isinstance(sbc, WeakDirichlet):
                    salt_code[b, i] = K.SALT_WEAK
                    weak_x[b, i] = sbc.value
            cur = bc.current
            if isinstance(cur, GivenCurrent):
                cur_code[b] = K.CUR_GIVEN
                given_J[b] = _data(cur.value, phys[b], normals[b])
            elif isinstance(cur, LinearButlerVolmer):
                cur_code[b] = K.CUR_LINEAR_BV
                cur_par[b, :3] = (cur.i0, cur.alpha_sum, cur.V_e)
            elif isinstance(cur, TanhButlerVolmer):
                cur_code[b] = K.CUR_TANH_BV
                cur_par[b, :4] = (cur.i0, cur.x_ref, cur.V_e, cur.s)
                cur_salt[b] = cur.salt
            elif isinstance(cur, ProportionalToSaltFlux):
                cur_code[b] = K.CUR_PROP
                cur_par[b, 4] = cur.factor
                cur_salt[b] = cur.salt
            gpar[b] = bc.tangential(phys[b])
            # keep only the tangential part
            gpar[b] -= np.outer(gpar[b] @ normals[b], normals[b])
        return {
            "w": w,
            "normal": normals,
            "Vval": Vval,
            "Pval": Pval,
            "Xval": Xval,
            "Rval": Rval,
            "Nval": Nval,
            "salt_code": salt_code,
            "salt_alpha": salt_alpha,
            "weak_x": weak_x,
            "given_salt": given_salt,
            "cur_code": cur_code,
            "cur_par": cur_par,
            "cur_salt": cur_salt,
            "given_J": given_J,
            "gpar": gpar,
            "qp": qp,
        }

    @cached_property
    def boundary_cells(self):
        return self.problem.boundary[0]

    @cached_property
    def strong_mask(self):
        """Rows of the reduced system replaced by strong boundary equations."""
        s, L, n, pb = self.setup, self.layout, self.n, self.problem
        mask = np.zeros(self.size, dtype=bool)
        for c in range(2):
            mask[L.v_index(c, s.V.boundary_dofs)] = True
        mesh = s.mesh
        for b, eid in enumerate(mesh.boundary_edge_ids):
            bc = pb.bcs.tags[mesh.boundary_tags[b]]
            dofs = s.N.edge_dofs[eid]
            for i, sbc in enumerate(bc.salts):
                if not isinstance(sbc, WeakDirichlet):
                    mask[L.N_index(i, dofs)] = True
            mask[L.N_index(n - 1, dofs)] = True
        return mask

    @cached_property
    def boundary_rows(self):
        """Global rows of (Sv, SN) outputs for each boundary edge, (nb, 2 aV + n aN)."""
        ci = self.cell_index[self.boundary_cells]
        sl = self.sizes.slices
        return np.concatenate([ci[:, sl["v"]], ci[:, sl["N"]]], axis=1)

    @cached_property
    def slot_vectors(self):
        s = self.setup
        Pval, _ = tabulate_scalar(s, s.P)
        Xval, _ = tabulate_scalar(s, s.X)
        ip = np.zeros(s.P.ndofs)
        np.add.at(ip, s.P.cell_dofs, np.einsum("tq,qa->ta", s.dx, Pval))
        ix = np.zeros(s.X.ndofs)
        np.add.at(ix, s.X.cell_dofs, np.einsum("tq,qa->ta", s.dx, Xval))
        return ip, ix

    @cached_property
    def area(self):
        return float(self.setup.dx.sum())

    @cached_property
    def linear_part(self):
        """Sparse matrix of all u-linear global terms: multiplier columns, linear
        constraint rows and the reconstruction rows (extended size)."""
        L, n, pb = self.layout, self.n, self.problem
        ip, ix = self.slot_vectors
        rows, cols, vals = [], [], []
        m0 = L.offsets["mult"][0]
        k = 0
        for c_i, (c, slot) in enumerate(zip(pb.constraints.items, pb.constraints.slots)):
            if slot is not None:
                col = m0 + k
                k += 1
                if slot == "mavg":
                    r, v = L.offsets["p"][0] + np.arange(len(ip)), ip
                elif slot == "cont:J":
                    r, v = L.offsets["phi"][0] + np.arange(len(ix)), ix
                else:
                    i = int(slot.split(":")[1])
                    r, v = L.x_index(i, np.arange(len(ix))), ix
                rows.append(r)
                cols.append(np.full(len(r), col))
                vals.append(v)
            row = m0 + c_i
            if isinstance(c, Normalization):
                for i in range(n - 1):
                    rows.append(np.full(len(ix), row))
                    cols.append(L.x_index(i, np.arange(len(ix))))
                    vals.append(pb.basis.nu_Z[i] * ix)
            elif isinstance(c, MeanPressure):
                rows.append(np.full(len(ip), row))
                cols.append(L.offsets["p"][0] + np.arange(len(ip)))
                vals.append(ip)
            elif isinstance(c, MeanPotential):
                rows.append(np.full(len(ix), row))
                cols.append(L.offsets["phi"][0] + np.arange(len(ix)))
                vals.append(ix)
        M1, B, _ = self.setup.reconstruction_matrices
        M1, B = M1.tocoo(), B.tocoo()
        for i in range(n - 1):
            off = self.size + i * self.nR
            rows += [off + M1.row, off + B.row]
            cols += [off + M1.col, L.x_index(i, B.col)]
            vals += [M1.data, -B.data]
        return sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.ext_size, self.ext_size)
        ).tocsr()

    def constraint_offsets(self):
        """Constant terms of the constraint rows (area-weighted targets)."""
        pb, A = self.problem, self.area
        out = np.zeros(len(pb.constraints.items))
        for c_i, c in enumerate(pb.constraints.items):
            if isinstance(c, Normalization):
                out[c_i] = -A
            elif isinstance(c, (MeanPressure, MeanPotential)):
                out[c_i] = -c.value * A
            elif isinstance(c, TotalMass):
                out[c_i] = -A
            elif isinstance(c, TotalMoles):
                target = c.mean_concentration
                if isinstance(target, str):
                    if pb.reference_moles is None:
                        raise DomainError("TotalMoles('initial') requires reference moles from the initial state")
                    target = pb.reference_moles[c.salt]
                out[c_i] = -float(target) * A
        return out

    # -------------------------------------------------------------- kernels
    def _kernel(self, kind):
        pb = self.problem
        key = (kind, pb.material, pb.basis, pb.scales, float(pb.gamma), bool(pb.frozen), self.sizes,
               self.setup.order, self.setup.quad_degree)
        fn = _KERNELS.get(key)
        if fn is None:
            if kind.startswith("cell"):
                ker = K.make_cell_kernel(pb, self.sizes, self.shared)
            elif kind.startswith("bdry"):
                ker = K.make_boundary_kernel(pb, self.sizes)
            else:
                ker = K.make_mass_kernel(pb, self.sizes, self.shared)
            fn = K.local_value(ker) if kind.endswith("val") else K.local_value_and_jacobian(ker)
            _KERNELS[key] = fn
        return fn

    @property
    def _cell_fn(self):
        return self._kernel("cell")

    @property
    def _cell_val(self):
        return self._kernel("cell_val")

    @property
    def _bdry_fn(self):
        return self._kernel("bdry")

    @property
    def _bdry_val(self):
        return self._kernel("bdry_val")

    @property
    def _mass_fn(self):
        return self._kernel("mass")

    # ------------------------------------------------------------- helpers
    def extend(self, state: DiscreteState) -> np.ndarray:
        x = state.x
        xi = np.stack([reconstruct(self.setup, x[i]) for i in range(self.n - 1)])
        return np.concatenate([state.vec, xi.ravel()])

    def check_domain(self, U):
        xi = U[self.size:].reshape(self.n - 1, self.nR)
        s = xi.sum(axis=0) if False else xi.T @ self.problem.basis.nu_Z
        if np.any(s <= 0):
            raise DomainError("reconstructed normalizer is not positive", location=int(np.argmin(s)))
        xt = (xi / s).T
        mesh = self.setup.mesh
        self.problem.material.check_domain(
            self.problem.basis, xt, location=lambda i: {"vertex": int(i[0]), "point": tuple(mesh.vertices[i[0]])}
        )

    def _bdry_loc(self, U):
        ci = self.cell_index[self.boundary_cells]
        lam = U[self.layout.block("leak")] if self.layout.has_leak else np.zeros(1)
        return np.concatenate([U[ci], np.broadcast_to(lam, (len(ci), 1))], axis=1)

    # ------------------------------------------------------------ assembly
    def residual(self, U, with_jacobian=False):
        """Extended residual (and Jacobian) at extended vector U."""
        self.check_domain(U)
        sz, n_out = self.sizes, self.sizes.n_out
        L = self.layout
        mask = self.strong_mask.astype(float)
        keep = 1.0 - mask
        ci = self.cell_index
        loc = U[ci]
        if with_jacobian:
            val, jac = K.as_numpy(self._cell_fn(loc, self.cell_data))
        else:
            val = np.asarray(self._cell_val(loc, self.cell_data))
        if not np.all(np.isfinite(val)):
            raise DomainError("non-finite residual from constitutive evaluation")
        R = np.zeros(self.ext_size)
        rows_c = ci[:, :n_out]
        w_c = keep[rows_c]
        np.add.at(R, rows_c, w_c * val[:, :n_out])
        ints = val[:, n_out:].sum(axis=0)  # moles per salt, mass
        # boundary
        bl = self._bdry_loc(U)
        if with_jacobian:
            bval, bjac = K.as_numpy(self._bdry_fn(bl, self.boundary_data))
        else:
            bval = np.asarray(self._bdry_val(bl, self.boundary_data))
        nS = 2 * sz.aV + sz.n * sz.aN
        brow = self.boundary_rows
        w_strong = mask[brow]
        w_weak = keep[brow[:, 2 * sz.aV:]]
        np.add.at(R, brow, w_strong * bval[:, :nS])
        np.add.at(R, brow[:, 2 * sz.aV:], w_weak * bval[:, nS:])
        # linear global terms and nonlinear constraint rows
        R += self.linear_part @ U
        m0 = L.offsets["mult"][0]
        pb = self.problem
        offs = self.constraint_offsets()
        for c_i, c in enumerate(pb.constraints.items):
            R[m0 + c_i] += offs[c_i]
            if isinstance(c, TotalMoles):
                R[m0 + c_i] += ints[c.salt]
            elif isinstance(c, TotalMass):
                R[m0 + c_i] += ints[-1] / c.mean_density
        if not with_jacobian:
            return R
        rr, cc, dd = [], [], []
        nin = sz.n_in
        rr.append(np.repeat(rows_c, nin, axis=1).ravel())
        cc.append(np.tile(ci, (1, n_out)).ravel())
        dd.append((jac[:, :n_out, :] * w_c[:, :, None]).ravel())
        for c_i, c in enumerate(pb.constraints.items):
            if isinstance(c, (TotalMoles, TotalMass)):
                k = n_out + (c.salt if isinstance(c, TotalMoles) else self.n - 1)
                scale = 1.0 if isinstance(c, TotalMoles) else 1.0 / c.mean_density
                rr.append(np.full(ci.size, m0 + c_i))
                cc.append(ci.ravel())
                dd.append(scale * jac[:, k, :].ravel())
        bcols = self.cell_index[self.boundary_cells]
        if L.has_leak:
            bcols = np.concatenate([bcols, np.full((len(bcols), 1), L.offsets["leak"][0])], axis=1)
        else:
            bjac = bjac[:, :, :-1]
        nb_in = bcols.shape[1]
        rr.append(np.repeat(brow, nb_in, axis=1).ravel())
        cc.append(np.tile(bcols, (1, nS)).ravel())
        dd.append((bjac[:, :nS, :] * w_strong[:, :, None]).ravel())
        bw = brow[:, 2 * sz.aV:]
        nW = bw.shape[1]
        rr.append(np.repeat(bw, nb_in, axis=1).ravel())
        cc.append(np.tile(bcols, (1, nW)).ravel())
        dd.append((bjac[:, nS:, :] * w_weak[:, :, None]).ravel())
        Jm = sp.coo_matrix(
            (np.concatenate(dd), (np.concatenate(rr), np.concatenate(cc))), shape=(self.ext_size, self.ext_size)
        ).tocsr()
        Jm = Jm + self.linear_part
        return R, Jm

    def mass(self, U, with_jacobian=True):
        """Time-derivative vector g(U) on momentum and salt-continuity rows."""
        sz = self.sizes
        ci = self.cell_index
        val, jac = K.as_numpy(self._mass_fn(U[ci], self.cell_data))
        sl = sz.slices
        rows = np.concatenate([ci[:, sl["v"]], ci[:, sl["x"]]], axis=1)
        keep = 1.0 - self.strong_mask.astype(float)
        w = keep[rows]
        g = np.zeros(self.ext_size)
        np.add.at(g, rows, w * val)
        if not with_jacobian:
            return g
        G = sp.coo_matrix(
            (
                (jac * w[:, :, None]).ravel(),
                (np.repeat(rows, sz.n_in, axis=1).ravel(), np.tile(ci, (1, rows.shape[1])).ravel()),
            ),
            shape=(self.ext_size, self.ext_size),
        ).tocsr()
        return g, G

    @cached_property
    def reconstruction_operator(self):
        """Dense map from reduced u to xi: xi = P u."""
        M1, B, lu = self.setup.reconstruction_matrices
        Bd = B.toarray()
        Pm = lu.solve(Bd)
        rows, cols, vals = [], [], []
        for i in range(self.n - 1):
            r, c = np.nonzero(np.abs(Pm) > 0)
            rows.append(i * self.nR + r)
            cols.append(self.layout.x_index(i, c))
            vals.append(Pm[r, c])
        return sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=((self.n - 1) * self.nR, self.size),
        ).tocsr()


def _rt_at(setup, cell, ref):
    """Piola-mapped RT basis values of one cell at reference points, (q, aN, 2)."""
    val, _ = setup.N.element.tabulate(ref)
    g = setup.geometry
    phys = np.einsum("ij,qlj->qli", g.J[cell], val) / g.detJ[cell]
    return phys * setup.N.signs[cell][None, :, None]


def _data(value, pts, normal):
    if callable(value):
        try:
            nargs = len(inspect.signature(value).parameters)
        except (TypeError, ValueError):
            nargs = 1
        out = value(pts, np.broadcast_to(normal, pts.shape)) if nargs >= 2 else value(pts)
        return np.asarray(out, dtype=float)
    return np.full(len(pts), float(value))


_CACHE_ATTR = "_osmium_assembler"
# compiled kernels shared by problems with identical physics and element sizes
_KERNELS = {}


def get_assembler(problem: Problem) -> Assembler:
    a = getattr(problem, _CACHE_ATTR, None)
    if a is None:
        a = Assembler(problem)
        setattr(problem, _CACHE_ATTR, a)
    return a


def assemble_residual(state: DiscreteState, problem: Problem) -> np.ndarray:
    """Reduced residual with reconstructions computed from the state."""
    a = get_assembler(problem)
    return a.residual(a.extend(state))[: a.size]


def assemble_jacobian(state: DiscreteState, problem: Problem) -> sp.csr_matrix:
    """Exact reduced Jacobian, including the dependence through reconstruction."""
    a = get_assembler(problem)
    _, Jm = a.residual(a.extend(state), with_jacobian=True)
    Juu = Jm[: a.size, : a.size]
    Jux = Jm[: a.size, a.size:]
    return (Juu + Jux @ a.reconstruction_operator).tocsr()


def fd_check(state: DiscreteState, problem: Problem, direction=None, eps=None, seed=0):
    """Relative mismatch between K w and a central difference of the residual."""
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(state.vec.size) if direction is None else np.asarray(direction, dtype=float)
    Kw = assemble_jacobian(state, problem) @ w
    if eps is None:
        eps = 1e-6 * max(1.0, np.linalg.norm(state.vec)) / np.linalg.norm(w)
    up = DiscreteState(state.layout, state.vec + eps * w)
    dn = DiscreteState(state.layout, state.vec - eps * w)
    fd = (assemble_residual(up, problem) - assemble_residual(dn, problem)) / (2 * eps)
    return float(np.linalg.norm(fd - Kw) / max(np.linalg.norm(Kw), 1e-300))
