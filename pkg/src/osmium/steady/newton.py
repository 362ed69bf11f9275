"""Newton's method with sparse direct solves on the extended system."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from ..errors import DomainError, NonConvergence, SingularLinearSystem
from .assembly import get_assembler
from .problem import DiscreteState, Problem

SINGULAR_MSG = (
    "the Newton linear system is singular: an integral constraint is probably missing "
    "(see analyze_constraints for the required count and a recommended set)"
)
DIVERGED_MSG = (
    "the Newton Jacobian became singular at iteration {it}: the iterate left the region where the "
    "discrete system is well conditioned (for example saturated electrode kinetics); enable "
    "solver.line_search or initial.potential_guess"
)


@dataclass(frozen=True)
class NewtonSettings:
    tol: float = 1e-10
    max_iter: int = 25
    # backtracking on the residual norm; off by default (full Newton steps)
    line_search: bool = False
    max_halvings: int = 12
    pivot_tol: float = 1e-13  # min |U_ii| / max |U_ii| of the LU factor


@dataclass
class NewtonReport:
    converged: bool
    iterations: int
    history: list = field(default_factory=list)  # residual norm per iterate, starting with the initial one

    @property
    def final_residual(self):
        return self.history[-1] if self.history else np.nan

    def rows(self):
        return [(i, r) for i, r in enumerate(self.history)]


def factorize(J, pivot_tol=1e-13):
    """Sparse LU of J; SingularLinearSystem on exact or numerical rank deficiency."""
    try:
        lu = spla.splu(J.tocsc(), permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SingularLinearSystem(f"{SINGULAR_MSG} ({exc})") from exc
    d = np.abs(lu.U.diagonal())
    if not np.all(np.isfinite(d)) or d.min() <= pivot_tol * d.max():
        raise SingularLinearSystem(f"{SINGULAR_MSG} (pivot ratio {d.min() / max(d.max(), 1e-300):.1e})")
    return lu


def solve_system(residual_and_jacobian, U0, settings: NewtonSettings, residual_only=None, make_state=None):
    """Generic Newton loop on a flat vector. Returns (U, report)."""
    U = U0.copy()
    history = []
    best = (np.inf, U.copy())
    for it in range(settings.max_iter + 1):
        R, J = residual_and_jacobian(U)
        r = float(np.linalg.norm(R))
        history.append(r)
        if r < best[0]:
            best = (r, U.copy())
        if not np.isfinite(r):
            break
        if r <= settings.tol:
            if it == 0:
                # no step was needed; still reject a rank-deficient system
                factorize(J, settings.pivot_tol)
            return U, NewtonReport(True, it, history)
        if it == settings.max_iter:
            break
        try:
            lu = factorize(J, settings.pivot_tol)
            dU = -lu.solve(R)
            if not np.all(np.isfinite(dU)) or np.linalg.norm(J @ dU + R) > 1e-6 * max(r, 1e-300):
                raise SingularLinearSystem(SINGULAR_MSG)
        except SingularLinearSystem as exc:
            if it > 0:
                exc = SingularLinearSystem(f"{DIVERGED_MSG.format(it=it)} ({exc})")
            exc.history = history
            raise exc
        step = 1.0
        for _ in range(settings.max_halvings + 1):
            trial = U + step * dU
            try:
                if settings.line_search and residual_only is not None:
                    rt = float(np.linalg.norm(residual_only(trial)))
                    if not (rt < (1 - 1e-4 * step) * r):
                        raise DomainError("insufficient decrease")
                elif residual_only is not None:
                    residual_only.check(trial)
                break
            except DomainError:
                step *= 0.5
        else:
            break
        U = trial
    state = make_state(best[1]) if make_state else best[1]
    raise NonConvergence(
        f"Newton did not converge in {settings.max_iter} iterations (best residual {best[0]:.3e})",
        state=state,
        history=history,
    )


class _DomainProbe:
    """Callable residual that also offers a cheap domain check."""

    def __init__(self, asm):
        self.asm = asm

    def __call__(self, U):
        return self.asm.residual(U)

    def check(self, U):
        self.asm.check_domain(U)


def newton_solve(initial_state: DiscreteState, problem: Problem, settings: NewtonSettings | None = None):
    """Solve the steady discrete system; returns (state, NewtonReport)."""
    settings = settings or NewtonSettings()
    asm = get_assembler(problem)
    U0 = asm.extend(initial_state)
    U, report = solve_system(
        lambda U: asm.residual(U, with_jacobian=True),
        U0,
        settings,
        residual_only=_DomainProbe(asm),
        make_state=lambda U: DiscreteState(problem.layout, U[: asm.size].copy()),
    )
    return DiscreteState(problem.layout, U[: asm.size].copy()), report
