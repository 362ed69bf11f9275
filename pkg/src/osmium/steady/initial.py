"""Initial guesses for Newton iterations."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..femcore.spaces import evaluate_scalar, tabulate_scalar
from .kernels import make_props
from .problem import DiscreteState, LinearButlerVolmer, Problem, TanhButlerVolmer


def _conductivity(problem: Problem, x_nu):
    """Nondimensional conductivity |z|^2 [(M^gamma)^-1]_nn at a uniform composition."""
    pr = make_props(problem)(np.asarray(x_nu, dtype=float), 0.0)
    Mg = np.asarray(pr["Mg"])
    return problem.basis.znorm**2 * np.linalg.inv(Mg)[-1, -1]


def potential_guess(state: DiscreteState, problem: Problem) -> DiscreteState:
    """Replace the potential by the solution of a Robin-Laplace problem.

    Electrode kinetics are linearized about equilibrium, so the guess sits
    near each electrode's potential with an ohmic drop in between. Returns the
    state unchanged when no Butler-Volmer condition is present.
    """
    s = problem.setup
    mesh = s.mesh
    cells, local, ref, w, phys, normals, idx = problem.boundary
    tags = np.asarray(mesh.boundary_tags, dtype=object)[idx]
    sel = [b for b in range(len(idx)) if isinstance(problem.bcs.tags[tags[b]].current, (LinearButlerVolmer, TanhButlerVolmer))]
    if not sel:
        return state
    x = state.x
    x_mean = np.array([np.sum(s.dx * evaluate_scalar(s, s.X, xi)) for xi in x]) / s.dx.sum()
    kappa = _conductivity(problem, x_mean)
    _, grad = tabulate_scalar(s, s.P)
    Kloc = kappa * np.einsum("tq,tqad,tqbd->tab", s.dx, grad, grad)
    cd = s.P.cell_dofs
    rows = [np.repeat(cd, cd.shape[1], axis=1).ravel()]
    cols = [np.tile(cd, (1, cd.shape[1])).ravel()]
    vals = [Kloc.ravel()]
    rhs = np.zeros(s.P.ndofs)
    nu = problem.basis.Z[:-1]
    for b in sel:
        cur = problem.bcs.tags[tags[b]].current
        val = s.P.element.tabulate(ref[b])[0]
        d = cd[cells[b]]
        if isinstance(cur, LinearButlerVolmer):
            k, V = cur.i0 * cur.alpha_sum, cur.V_e
        else:
            xs = x_mean[cur.salt]
            k = 2 * cur.i0 * (xs / cur.x_ref) ** 2
            xp = x_mean @ nu
            V = cur.V_e + cur.s * float(np.log(xp) @ nu[cur.salt])
        Mb = k * np.einsum("q,qa,qb->ab", w[b], val, val)
        rows.append(np.repeat(d, len(d)))
        cols.append(np.tile(d, len(d)))
        vals.append(Mb.ravel())
        np.add.at(rhs, d, k * V * (w[b] @ val))
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(s.P.ndofs,) * 2)
    phi_cg = spla.spsolve(A.tocsc(), rhs)
    out = state.copy()
    dg = evaluate_scalar(s, s.P, phi_cg, ref_pts=s.X.element.nodes)
    phi = np.zeros(s.X.ndofs)
    phi[s.X.cell_dofs] = dg
    out.vec[problem.layout.block("phi")] = phi
    return out
