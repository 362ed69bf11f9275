"""Error metrics and boundary audits evaluated on discrete states."""
from __future__ import annotations

import jax
import numpy as np

from ..femcore.spaces import evaluate_rt, evaluate_scalar, tabulate_scalar
from .assembly import get_assembler
from .kernels import make_props
from .problem import DiscreteState, Problem, WeakDirichlet


def _props_at(problem, xt, pt):
    shape = pt.shape
    props = jax.vmap(make_props(problem))
    out = props(xt.reshape(-1, xt.shape[-1]), pt.ravel())
    return {k: np.asarray(v).reshape(shape + np.asarray(v).shape[1:]) for k, v in out.items()}


def quadrature_fields(state: DiscreteState, problem: Problem):
    """Fields at cell quadrature points: v, p, N_Z, x (DG), x~ (normalized reconstruction)."""
    s = problem.setup
    asm = get_assembler(problem)
    U = asm.extend(state)
    n = problem.n
    Rval, _ = tabulate_scalar(s, s.R)
    xi = U[asm.size:].reshape(n - 1, asm.nR)
    xq = np.einsum("qa,ita->tqi", Rval, xi[:, s.R.cell_dofs])
    xt = xq / (xq @ problem.basis.nu_Z)[..., None]
    v = np.stack([evaluate_scalar(s, s.V, state.v[c]) for c in range(2)], axis=-1)
    p = evaluate_scalar(s, s.P, state.p)
    N = np.stack([evaluate_rt(s, state.N_Z[i])[0] for i in range(n)], axis=2)
    x = np.stack([evaluate_scalar(s, s.X, state.x[i]) for i in range(n - 1)], axis=-1)
    return {"v": v, "p": p, "N": N, "x": x, "xt": xt}


def error_metrics(state: DiscreteState, problem: Problem):
    """E1 = ||v - psi~^T N||, E2 = ||1 - nu_Z^T x|| (L2, nondimensional)."""
    f = quadrature_fields(state, problem)
    pr = _props_at(problem, f["xt"], f["p"])
    slip = f["v"] - np.einsum("tqi,tqic->tqc", pr["psi"], f["N"])
    w = problem.setup.dx
    E1 = np.sqrt(np.sum(w * np.sum(slip**2, axis=-1)))
    E2 = np.sqrt(np.sum(w * (1 - f["x"] @ problem.basis.nu_Z) ** 2))
    return {"E1": float(E1), "E2": float(E2)}


def salt_moles(state: DiscreteState, problem: Problem):
    """Integrals of the reconstructed salt concentrations (nondimensional)."""
    f = quadrature_fields(state, problem)
    pr = _props_at(problem, f["xt"], f["p"])
    w = problem.setup.dx
    return np.einsum("tq,tq,tqi->i", w, pr["cT"], f["xt"])


def total_mass(state: DiscreteState, problem: Problem):
    f = quadrature_fields(state, problem)
    pr = _props_at(problem, f["xt"], f["p"])
    return float(np.sum(problem.setup.dx * pr["rho"]))


def weak_dirichlet_report(state: DiscreteState, problem: Problem):
    """Per weakly pinned (tag, salt): L2 boundary error of x and the neglected pressure term.

    The audit ratio compares ||p (psi_s - V_s)|| with ||x X_ss|| on the tag.
    """
    s = problem.setup
    asm = get_assembler(problem)
    U = asm.extend(state)
    cells, local, ref, w, phys, normals, idx = problem.boundary
    n = problem.n
    tags = np.asarray(s.mesh.boundary_tags, dtype=object)[idx]
    xi = U[asm.size:].reshape(n - 1, asm.nR)
    out = []
    for tag, bc in problem.bcs.tags.items():
        for i, sbc in enumerate(bc.salts):
            if not isinstance(sbc, WeakDirichlet):
                continue
            sel = np.flatnonzero(tags == tag)
            err2 = ip2 = main2 = 0.0
            for b in sel:
                c, r = cells[b], ref[b]
                Xv = s.X.element.tabulate(r)[0]
                Pv = s.P.element.tabulate(r)[0]
                Rv = s.R.element.tabulate(r)[0]
                x = Xv @ state.x[:, s.X.cell_dofs[c]].T
                pq = Pv @ state.p[s.P.cell_dofs[c]]
                xq = Rv @ xi[:, s.R.cell_dofs[c]].T
                xt = xq / (xq @ problem.basis.nu_Z)[:, None]
                pr = _props_at(problem, xt, pq)
                err2 += np.sum(w[b] * (x[:, i] - sbc.value) ** 2)
                ip2 += np.sum(w[b] * (pq * (pr["psi"][:, i] - pr["V"][:, i])) ** 2)
                main2 += np.sum(w[b] * (x[:, i] * pr["X"][:, i, i]) ** 2)
            out.append(
                {
                    "tag": tag,
                    "salt": i,
                    "target": sbc.value,
                    "boundary_error": float(np.sqrt(err2)),
                    "pressure_term": float(np.sqrt(ip2)),
                    "pressure_ratio": float(np.sqrt(ip2) / max(np.sqrt(main2), 1e-300)),
                }
            )
    return out
