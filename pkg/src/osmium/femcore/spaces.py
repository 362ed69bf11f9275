"""Global finite element spaces, DOF maps and basic operators."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import NonpositiveNormalizer, UnsupportedOrder
from .elements import LagrangeElement, RTElement, edge_points, lagrange, raviart_thomas
from .mesh import Mesh2D
from .quadrature import QuadratureRule, interval_rule, triangle_rule


@dataclass(frozen=True, eq=False)
class Geometry:
    J: np.ndarray  # (nt, 2, 2) columns v1-v0, v2-v0
    detJ: np.ndarray  # (nt,)
    invJ: np.ndarray  # (nt, 2, 2)
    origin: np.ndarray  # (nt, 2)

    def map(self, ref_pts):
        """Physical coordinates (nt, q, 2) of reference points."""
        return self.origin[:, None, :] + np.einsum("tij,qj->tqi", self.J, ref_pts)


def cell_geometry(mesh: Mesh2D) -> Geometry:
    v = mesh.vertices[mesh.triangles]
    J = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=2)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    inv = np.empty_like(J)
    inv[:, 0, 0] = J[:, 1, 1] / det
    inv[:, 1, 1] = J[:, 0, 0] / det
    inv[:, 0, 1] = -J[:, 0, 1] / det
    inv[:, 1, 0] = -J[:, 1, 0] / det
    return Geometry(J, det, inv, v[:, 0].copy())


@dataclass(frozen=True, eq=False)
class LagrangeSpace:
    element: LagrangeElement
    cell_dofs: np.ndarray  # (nt, nloc)
    ndofs: int
    dof_coords: np.ndarray  # (ndofs, 2)
    continuous: bool = True
    boundary_dofs: np.ndarray = field(default=None, repr=False)

    @property
    def degree(self):
        return self.element.degree


@dataclass(frozen=True, eq=False)
class RTSpace:
    element: RTElement
    cell_dofs: np.ndarray  # (nt, nloc)
    signs: np.ndarray  # (nt, nloc)
    ndofs: int
    edge_dofs: np.ndarray  # (ne, k) global dof ids per edge (q=1 first)

    @property
    def order(self):
        return self.element.order


def lagrange_space(mesh: Mesh2D, degree: int, continuous=True) -> LagrangeSpace:
    el = lagrange(degree)
    nt = mesh.n_cells
    geo_nodes = cell_geometry(mesh).map(el.nodes)
    if not continuous or degree == 0:
        cd = np.arange(nt * el.dim).reshape(nt, el.dim)
        return LagrangeSpace(el, cd, nt * el.dim, geo_nodes.reshape(-1, 2), False, np.zeros(0, dtype=np.int64))
    m = degree
    keys = {}
    cd = np.empty((nt, el.dim), dtype=np.int64)
    coords = []
    tri = mesh.triangles
    for t in range(nt):
        for a, lat in enumerate(el.lattice):
            nz = np.flatnonzero(lat)
            if len(nz) == 1:
                key = ("v", int(tri[t, nz[0]]))
            elif len(nz) == 2:
                e_loc = 3 - int(nz.sum())  # local edge opposite the missing vertex
                gv = tri[t, nz]
                low = nz[np.argmin(gv)]
                key = ("e", int(mesh.cell_edges[t, e_loc]), int(lat[low]))
            else:
                key = ("i", t, a)
            if key not in keys:
                keys[key] = len(keys)
                coords.append(geo_nodes[t, a])
            cd[t, a] = keys[key]
    # boundary dofs: vertex and edge nodes lying on boundary edges
    bset = set()
    for eid in mesh.boundary_edge_ids:
        a, b = mesh.edges[eid]
        bset.add(keys[("v", int(a))])
        bset.add(keys[("v", int(b))])
        for j in range(1, m):
            bset.add(keys[("e", int(eid), j)])
    return LagrangeSpace(el, cd, len(keys), np.array(coords), True, np.array(sorted(bset), dtype=np.int64))


def rt_space(mesh: Mesh2D, order: int) -> RTSpace:
    el = raviart_thomas(order)
    nt, ne = mesh.n_cells, mesh.n_edges
    k = el.n_edge
    edge_dofs = np.arange(ne * k).reshape(ne, k)
    cd = np.empty((nt, el.dim), dtype=np.int64)
    signs = np.ones((nt, el.dim))
    tri = mesh.triangles
    for i in range(3):
        a, b = tri[:, (i + 1) % 3], tri[:, (i + 2) % 3]
        s = np.where(a < b, 1.0, -1.0)
        eids = mesh.cell_edges[:, i]
        for q in range(k):
            cd[:, i * k + q] = edge_dofs[eids, q]
            # q = 0 moment against 1 flips with the normal; q = 1 against t flips twice
            signs[:, i * k + q] = s if q == 0 else 1.0
    if el.n_interior:
        cd[:, 3 * k:] = ne * k + np.arange(nt * el.n_interior).reshape(nt, el.n_interior)
    return RTSpace(el, cd, signs, ne * k + nt * el.n_interior, edge_dofs)


@dataclass(frozen=True, eq=False)
class SpaceSetup:
    mesh: Mesh2D
    order: int
    V: LagrangeSpace  # scalar component space, degree k+1
    P: LagrangeSpace  # degree k
    N: RTSpace
    X: LagrangeSpace  # discontinuous degree k-1
    R: LagrangeSpace  # continuous degree 1 (reconstruction target)
    geometry: Geometry
    rule: QuadratureRule
    edge_rule: QuadratureRule

    @property
    def quad_degree(self):
        return self.rule.degree

    @cached_property
    def quad_points(self):
        """Physical quadrature points (nt, q, 2)."""
        return self.geometry.map(self.rule.points)

    @cached_property
    def dx(self):
        """Quadrature weights times |det J|, (nt, q)."""
        return self.rule.weights[None, :] * self.geometry.detJ[:, None]

    @cached_property
    def reconstruction_matrices(self):
        """(M1, B): CG1 mass matrix and CG1-DG coupling, and a factorization of M1."""
        M1 = assemble_mass_matrix(self, self.R)
        B = _mixed_mass(self, self.R, self.X)
        return M1, B, spla.splu(M1.tocsc())


def build_spaces(mesh: Mesh2D, order: int, quad_degree: int | None = None) -> SpaceSetup:
    if order not in (1, 2):
        raise UnsupportedOrder(f"order must be 1 or 2, got {order}")
    qd = 2 * (order + 1) + 2 if quad_degree is None else int(quad_degree)
    return SpaceSetup(
        mesh,
        order,
        lagrange_space(mesh, order + 1),
        lagrange_space(mesh, order),
        rt_space(mesh, order),
        lagrange_space(mesh, order - 1, continuous=False),
        lagrange_space(mesh, 1),
        cell_geometry(mesh),
        triangle_rule(qd),
        interval_rule(qd),
    )


# ---------------------------------------------------------------------------
# tabulation on physical cells


def tabulate_scalar(setup: SpaceSetup, space: LagrangeSpace, ref_pts=None):
    """Values (q, nloc) and physical gradients (nt, q, nloc, 2)."""
    pts = setup.rule.points if ref_pts is None else ref_pts
    val, dref = space.element.tabulate(pts)
    grad = np.einsum("qlj,tji->tqli", dref, setup.geometry.invJ)
    return val, grad


def tabulate_rt(setup: SpaceSetup, ref_pts=None):
    """Piola-mapped values (nt, q, nloc, 2) and divergences (nt, q, nloc), signs applied."""
    pts = setup.rule.points if ref_pts is None else ref_pts
    val, div = setup.N.element.tabulate(pts)
    g = setup.geometry
    s = setup.N.signs
    phys = np.einsum("tij,qlj->tqli", g.J, val) / g.detJ[:, None, None, None]
    phys = phys * s[:, None, :, None]
    pdiv = div[None] / g.detJ[:, None, None] * s[:, None, :]
    return phys, pdiv


def _coefficient(setup, coefficient):
    if callable(coefficient):
        return np.broadcast_to(np.asarray(coefficient(setup.quad_points), dtype=float), setup.dx.shape)
    return np.full(setup.dx.shape, float(coefficient))


def _scatter(cd_rows, cd_cols, local, shape):
    nt, a, b = local.shape
    rows = np.repeat(cd_rows, b, axis=1).reshape(nt, a, b)
    cols = np.tile(cd_cols, (1, a)).reshape(nt, a, b)
    return sp.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())), shape=shape).tocsr()


def assemble_mass_matrix(setup: SpaceSetup, space, coefficient=1.0) -> sp.csr_matrix:
    """Weighted mass matrix of a scalar Lagrange/DG space or the RT space."""
    w = setup.dx * _coefficient(setup, coefficient)
    if isinstance(space, RTSpace):
        phi, _ = tabulate_rt(setup)
        local = np.einsum("tq,tqac,tqbc->tab", w, phi, phi)
    else:
        val, _ = tabulate_scalar(setup, space)
        local = np.einsum("tq,qa,qb->tab", w, val, val)
    return _scatter(space.cell_dofs, space.cell_dofs, local, (space.ndofs, space.ndofs))


def _mixed_mass(setup, row_space, col_space):
    vr, _ = tabulate_scalar(setup, row_space)
    vc, _ = tabulate_scalar(setup, col_space)
    local = np.einsum("tq,qa,qb->tab", setup.dx, vr, vc)
    return _scatter(row_space.cell_dofs, col_space.cell_dofs, local, (row_space.ndofs, col_space.ndofs))


def divergence_matrix(setup: SpaceSetup) -> sp.csr_matrix:
    """(div N_j, y_i) for RT basis N_j and DG basis y_i."""
    _, div = tabulate_rt(setup)
    vx, _ = tabulate_scalar(setup, setup.X)
    local = np.einsum("tq,qa,tqb->tab", setup.dx, vx, div)
    return _scatter(setup.X.cell_dofs, setup.N.cell_dofs, local, (setup.X.ndofs, setup.N.ndofs))


# ---------------------------------------------------------------------------
# reconstruction, normalization and projections


def reconstruct(setup: SpaceSetup, dg_values) -> np.ndarray:
    """L2 projection of DG coefficients (ndofs_X, ...) onto continuous P1."""
    M1, B, lu = setup.reconstruction_matrices
    rhs = B @ np.asarray(dg_values, dtype=float)
    if rhs.ndim == 1:
        return lu.solve(rhs)
    return np.stack([lu.solve(rhs[:, j]) for j in range(rhs.shape[1])], axis=1)


def normalize_mole_fractions(fields, nu_Z, tol=0.0):
    """Divide fields (..., n-1) pointwise by nu_Z . fields."""
    fields = np.asarray(fields, dtype=float)
    s = fields @ np.asarray(nu_Z, dtype=float)
    if np.any(s <= tol):
        raise NonpositiveNormalizer("nu_Z . x is not positive at some point")
    return fields / s[..., None]


def evaluate_scalar(setup: SpaceSetup, space: LagrangeSpace, coeffs, ref_pts=None):
    """Field values (nt, q) at quadrature (or given reference) points."""
    val, _ = tabulate_scalar(setup, space, ref_pts)
    return np.einsum("qa,ta->tq", val, np.asarray(coeffs)[space.cell_dofs])


def evaluate_rt(setup: SpaceSetup, coeffs, ref_pts=None):
    phi, div = tabulate_rt(setup, ref_pts)
    c = np.asarray(coeffs)[setup.N.cell_dofs]
    return np.einsum("tqac,ta->tqc", phi, c), np.einsum("tqa,ta->tq", div, c)


def interpolate_lagrange(space: LagrangeSpace, func) -> np.ndarray:
    """Nodal interpolation of ``func(points (m, 2)) -> (m,)``."""
    return np.asarray(func(space.dof_coords), dtype=float)


def project_dg(setup: SpaceSetup, func) -> np.ndarray:
    """L2 projection of func(points (nt, q, 2)) onto the DG space."""
    val, _ = tabulate_scalar(setup, setup.X)
    f = np.asarray(func(setup.quad_points), dtype=float)
    rhs = np.einsum("tq,qa,tq->ta", setup.dx, val, f)
    Mloc = np.einsum("tq,qa,qb->tab", setup.dx, val, val)
    return np.linalg.solve(Mloc, rhs[..., None])[..., 0].ravel()


def project_rt(setup: SpaceSetup, func) -> np.ndarray:
    """Global L2 projection of a vector field func(points (nt, q, 2)) -> (nt, q, 2) onto RT."""
    phi, _ = tabulate_rt(setup)
    f = np.asarray(func(setup.quad_points), dtype=float)
    loc = np.einsum("tq,tqac,tqc->ta", setup.dx, phi, f)
    rhs = np.zeros(setup.N.ndofs)
    np.add.at(rhs, setup.N.cell_dofs, loc)
    M = assemble_mass_matrix(setup, setup.N)
    return spla.spsolve(M.tocsc(), rhs)


def boundary_quadrature(setup: SpaceSetup, edge_ids=None):
    """For boundary edges: cell, local edge, reference points (nb, q, 2), weights (nb, q),
    physical points, outward unit normals (nb, 2) and the boundary-edge indices used."""
    mesh = setup.mesh
    idx = np.arange(len(mesh.boundary_edge_ids)) if edge_ids is None else np.asarray(edge_ids)
    eids = mesh.boundary_edge_ids[idx]
    cells = mesh.edge_cells[eids, 0]
    local = np.array([int(np.flatnonzero(mesh.cell_edges[c] == e)[0]) for c, e in zip(cells, eids)], dtype=np.int64)
    s = setup.edge_rule.points[:, 0]
    ref = np.stack([edge_points(i, s) for i in local]) if len(local) else np.zeros((0, len(s), 2))
    L = mesh.edge_lengths()[eids]
    w = setup.edge_rule.weights[None, :] * L[:, None]
    phys = setup.geometry.origin[cells][:, None, :] + np.einsum("bij,bqj->bqi", setup.geometry.J[cells], ref)
    normals = mesh.boundary_normals()[idx]
    return cells, local, ref, w, phys, normals, idx


def trace_project(setup: SpaceSetup, func, target="flux-normal-trace", edge_ids=None):
    """L2(Gamma) projection of boundary data onto a discrete trace space.

    ``flux-normal-trace``: ``func(points (m, 2), normals (m, 2)) -> (m,)`` scalar
    normal data; returns {global RT dof: value}. ``velocity-trace``:
    ``func(points) -> (m, 2)``; returns (boundary dof ids, values (nbdof, 2)).
    """
    mesh = setup.mesh
    cells, local, ref, w, phys, normals, idx = boundary_quadrature(setup, edge_ids)
    if target == "flux-normal-trace":
        k = setup.N.element.n_edge
        out = {}
        s = setup.edge_rule.points[:, 0]
        for b in range(len(idx)):
            eid = mesh.boundary_edge_ids[idx[b]]
            g = np.asarray(func(phys[b], np.repeat(normals[b][None], len(s), axis=0)), dtype=float)
            a_loc, c_loc = (local[b] + 1) % 3, (local[b] + 2) % 3
            tri = mesh.triangles[cells[b]]
            # global normal orientation and global edge parameter
            sign_n = float(np.dot(mesh.edge_normals()[eid], normals[b]))
            forward = tri[a_loc] < tri[c_loc]
            t = 2 * s - 1 if forward else 1 - 2 * s
            qs = [np.ones_like(s), t][:k]
            for q in range(k):
                out[int(setup.N.edge_dofs[eid, q])] = float(np.sum(w[b] * g * sign_n * qs[q]))
        return out
    if target == "velocity-trace":
        val, _ = setup.V.element.tabulate(ref.reshape(-1, 2))
        val = val.reshape(len(idx), -1, setup.V.element.dim)
        dofs = setup.V.boundary_dofs
        pos = {int(d): i for i, d in enumerate(dofs)}
        nb = len(dofs)
        Mb = np.zeros((nb, nb))
        rhs = np.zeros((nb, 2))
        for b in range(len(idx)):
            g = np.asarray(func(phys[b]), dtype=float)
            cd = setup.V.cell_dofs[cells[b]]
            on = [a for a in range(len(cd)) if int(cd[a]) in pos]
            for a in on:
                rhs[pos[int(cd[a])]] += np.sum(w[b][:, None] * val[b][:, a, None] * g, axis=0)
                for c in on:
                    Mb[pos[int(cd[a])], pos[int(cd[c])]] += np.sum(w[b] * val[b][:, a] * val[b][:, c])
        used = np.flatnonzero(np.diag(Mb) > 0)
        sol = scipy.linalg.solve(Mb[np.ix_(used, used)], rhs[used], assume_a="pos")
        return dofs[used], sol
    raise ValueError(f"unknown trace target {target!r}")
