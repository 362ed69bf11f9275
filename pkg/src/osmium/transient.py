"""Implicit Runge-Kutta time stepping of the semi-discrete system.

The semi-discrete system reads d/dt g(U) + R(U) = 0 where R is the steady
residual and g collects (rho~ v, u) on momentum rows and (c~_nu, y) on salt
continuity rows; all other rows are algebraic. With W = A^{-1}, stage i of an
s-stage method solves

    sum_j W_ij (g(U_j) - g(U_0)) / dt + R(U_i) = 0,

with every constraint row enforced at every stage. Radau IIA methods are
stiffly accurate, so the new state is the last stage.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, NonConvergence, SingularLinearSystem
from .steady.assembly import get_assembler
from .steady.initial import potential_guess
from .steady.metrics import error_metrics, salt_moles, total_mass
from .steady.newton import NewtonSettings, factorize, solve_system
from .steady.problem import DiscreteState, LeakProfile, Normalization, Problem, TotalMoles


@dataclass(frozen=True)
class Tableau:
    name: str
    A: tuple  # rows of Fractions
    b: tuple
    c: tuple
    order: int

    @property
    def stages(self):
        return len(self.b)

    def matrix(self):
        return np.array([[float(a) for a in row] for row in self.A])

    def inverse(self):
        return np.linalg.inv(self.matrix())

    @property
    def stiffly_accurate(self):
        return tuple(self.A[-1]) == tuple(self.b)


RADAU_IIA_1 = Tableau("RadauIIA-1", ((Fraction(1),),), (Fraction(1),), (Fraction(1),), 1)
RADAU_IIA_2 = Tableau(
    "RadauIIA-2",
    ((Fraction(5, 12), Fraction(-1, 12)), (Fraction(3, 4), Fraction(1, 4))),
    (Fraction(3, 4), Fraction(1, 4)),
    (Fraction(1, 3), Fraction(1)),
    3,
)
TABLEAUX = {t.name: t for t in (RADAU_IIA_1, RADAU_IIA_2)}


def get_tableau(name) -> Tableau:
    try:
        return TABLEAUX[name]
    except KeyError:
        raise ValueError(f"unknown scheme {name!r}; choose from {sorted(TABLEAUX)}") from None


# ---------------------------------------------------------------------------
# dense harness for small ODE / DAE test problems


def dense_irk_step(f, jac, M, y0, dt, tableau: Tableau, tol=1e-14, max_iter=20):
    """One step for M y' = f(y) with dense M; returns y at t + dt."""
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    M = np.atleast_2d(np.asarray(M, dtype=float))
    W = tableau.inverse()
    s, m = tableau.stages, len(y0)
    Y = np.tile(y0, s)
    for _ in range(max_iter):
        Ys = Y.reshape(s, m)
        R = np.concatenate([sum(W[i, j] * M @ (Ys[j] - y0) for j in range(s)) / dt - f(Ys[i]) for i in range(s)])
        if np.linalg.norm(R) <= tol * max(1.0, np.linalg.norm(y0)):
            break
        Jb = np.zeros((s * m, s * m))
        for i in range(s):
            for j in range(s):
                Jb[i * m:(i + 1) * m, j * m:(j + 1) * m] = W[i, j] * M / dt - (jac(Ys[i]) if i == j else 0)
        Y = Y - np.linalg.solve(Jb, R)
    return Y.reshape(s, m)[-1]


def dense_irk(f, jac, M, y0, dt, steps, tableau: Tableau):
    """Fixed-step integration; returns the trajectory (steps + 1, m)."""
    out = [np.atleast_1d(np.asarray(y0, dtype=float))]
    for _ in range(steps):
        out.append(dense_irk_step(f, jac, M, out[-1], dt, tableau))
    return np.array(out)


def observed_order(errors, dts):
    """Least-squares slope of log(error) against log(dt)."""
    return float(np.polyfit(np.log(dts), np.log(errors), 1)[0])


# ---------------------------------------------------------------------------
# finite element stage system


@dataclass(frozen=True)
class TimeStepper:
    scheme: str = "RadauIIA-2"
    dt: float = 864.0  # seconds
    steps: int = 20
    newton: NewtonSettings = field(default_factory=NewtonSettings)
    # start the first step's Newton iteration from a Robin-Laplace potential
    potential_guess: bool = True

    @property
    def tableau(self):
        return get_tableau(self.scheme)


class StageSystem:
    """Residual and Jacobian of the coupled stages of one step."""

    def __init__(self, problem: Problem, tableau: Tableau, dt_nondim: float, U0: np.ndarray):
        self.asm = get_assembler(problem)
        self.tableau = tableau
        self.W = tableau.inverse()
        self.dt = float(dt_nondim)
        self.U0 = U0
        self.g0 = self.asm.mass(U0, with_jacobian=False)
        self.m = self.asm.ext_size

    def split(self, Y):
        return Y.reshape(self.tableau.stages, self.m)

    def residual(self, Y, with_jacobian=False):
        s, W, dt = self.tableau.stages, self.W, self.dt
        Ys = self.split(Y)
        Rs, Js, gs, Gs = [], [], [], []
        for i in range(s):
            if with_jacobian:
                R, J = self.asm.residual(Ys[i], with_jacobian=True)
                g, G = self.asm.mass(Ys[i])
                Js.append(J)
                Gs.append(G)
            else:
                R = self.asm.residual(Ys[i])
                g = self.asm.mass(Ys[i], with_jacobian=False)
            Rs.append(R)
            gs.append(g - self.g0)
        out = np.concatenate([Rs[i] + sum(W[i, j] * gs[j] for j in range(s)) / dt for i in range(s)])
        if not with_jacobian:
            return out
        blocks = [[(W[i, j] / dt) * Gs[j] + (Js[i] if i == j else 0) for j in range(s)] for i in range(s)]
        return out, sp.bmat(blocks, format="csr")

    def check(self, Y):
        for U in self.split(Y):
            self.asm.check_domain(U)

    def __call__(self, Y):
        return self.residual(Y)


def transient_residual(stage_states, previous_state: DiscreteState, tableau: Tableau, dt, problem: Problem):
    """Stage residuals (reduced, one per stage) for given stage states; ``dt`` in seconds."""
    asm = get_assembler(problem)
    sysm = StageSystem(problem, tableau, dt / problem.scales.t_ref, asm.extend(previous_state))
    Y = np.concatenate([asm.extend(s) for s in stage_states])
    R = sysm.split(sysm.residual(Y))
    return [r[: asm.size] for r in R]


@dataclass
class StepReport:
    step: int
    time: float  # seconds
    iterations: int
    residual: float
    E1: float
    E2: float
    moles: np.ndarray
    mass: float
    history: list = field(default_factory=list)  # Newton residual norms of the step


@dataclass
class TransientReport:
    rows: list = field(default_factory=list)
    warning: str | None = None

    @property
    def moles(self):
        return np.array([r.moles for r in self.rows])

    @property
    def max_E1(self):
        return max(r.E1 for r in self.rows)

    @property
    def max_E2(self):
        return max(r.E2 for r in self.rows)

    def relative_drift(self):
        """Per-salt max |moles(t) - moles(0)| / moles(0)."""
        m = self.moles
        return np.max(np.abs(m - m[0]), axis=0) / np.abs(m[0])

    def header(self, n_salts):
        return ["step", "time_s", "newton_iterations", "residual", "E1", "E2"] + [
            f"moles_{i}" for i in range(n_salts)
        ] + ["mass"]

    def table(self):
        return [
            [r.step, r.time, r.iterations, r.residual, r.E1, r.E2, *map(float, r.moles), r.mass] for r in self.rows
        ]


def _report_row(state, problem, step, time, iterations, residual, history=()):
    e = error_metrics(state, problem)
    return StepReport(step, time, iterations, residual, e["E1"], e["E2"], salt_moles(state, problem),
                      total_mass(state, problem), list(history))


def ensure_reference_moles(state: DiscreteState, problem: Problem):
    """Fix TotalMoles('initial') targets from ``state`` (mean concentrations)."""
    if problem.reference_moles is None:
        problem.reference_moles = salt_moles(state, problem) / problem.setup.dx.sum()


def step(previous: DiscreteState, stepper: TimeStepper, problem: Problem, initial_guess=None):
    """Advance one step; returns (state, NewtonReport)."""
    asm = get_assembler(problem)
    tab = stepper.tableau
    U0 = asm.extend(previous)
    sysm = StageSystem(problem, tab, stepper.dt / problem.scales.t_ref, U0)
    guess = U0 if initial_guess is None else asm.extend(initial_guess)
    Y0 = np.tile(guess, tab.stages)
    Y, rep = solve_system(
        lambda Y: sysm.residual(Y, with_jacobian=True),
        Y0,
        stepper.newton,
        residual_only=sysm,
        make_state=lambda Y: DiscreteState(problem.layout, sysm.split(Y)[-1][: asm.size].copy()),
    )
    return DiscreteState(problem.layout, sysm.split(Y)[-1][: asm.size].copy()), rep


def run(initial: DiscreteState, stepper: TimeStepper, problem: Problem, callback=None, warning=None):
    """Time loop. Returns (states, TransientReport); on failure NonConvergence carries the partial report."""
    ensure_reference_moles(initial, problem)
    report = TransientReport(warning=warning)
    report.rows.append(_report_row(initial, problem, 0, 0.0, 0, 0.0))
    states = [initial]
    if callback:
        callback(0, initial, report.rows[-1])
    state = initial
    for k in range(1, stepper.steps + 1):
        guess = potential_guess(state, problem) if (k == 1 and stepper.potential_guess) else None
        try:
            state, rep = step(state, stepper, problem, initial_guess=guess)
        except (NonConvergence, DomainError, SingularLinearSystem) as exc:
            exc.report = report
            raise
        states.append(state)
        report.rows.append(_report_row(state, problem, k, k * stepper.dt, rep.iterations, rep.final_residual,
                                       rep.history))
        if callback:
            callback(k, state, report.rows[-1])
    return states, report


def conservation_report(states, problem: Problem, times=None) -> TransientReport:
    """Moles, mass and E1/E2 for a sequence of states."""
    times = np.arange(len(states), dtype=float) if times is None else times
    rep = TransientReport()
    for k, (s, t) in enumerate(zip(states, times)):
        rep.rows.append(_report_row(s, problem, k, float(t), 0, 0.0))
    return rep


def consistent_initialization(state: DiscreteState, problem: Problem, settings: NewtonSettings | None = None):
    """Solve the algebraic rows with the mole fractions held at their initial values.

    Salt continuity rows become x - x0 = 0; constraint rows that only involve
    compositions pin the multiplier (or leak amplitude) that they would
    otherwise determine to zero. Momentum is treated quasi-statically.
    """
    settings = settings or NewtonSettings()
    asm = get_assembler(problem)
    L = asm.layout
    U0 = asm.extend(state)
    xrows = np.arange(*L.offsets["x"])
    pin_rows, pin_cols = [], []
    m0 = L.offsets["mult"][0]
    k = 0
    for c_i, (c, slot) in enumerate(zip(problem.constraints.items, problem.constraints.slots)):
        col = None
        if slot is not None:
            col = m0 + k
            k += 1
        if isinstance(c, (Normalization, TotalMoles)):
            pin_rows.append(m0 + c_i)
            pin_cols.append(col if col is not None else L.offsets["leak"][0])
    pin_rows, pin_cols = np.array(pin_rows, dtype=int), np.array(pin_cols, dtype=int)
    keep = np.ones(asm.ext_size)
    keep[xrows] = 0
    keep[pin_rows] = 0
    E = sp.diags(keep)
    S = sp.coo_matrix(
        (np.ones(len(xrows) + len(pin_rows)), (np.concatenate([xrows, pin_rows]), np.concatenate([xrows, pin_cols]))),
        shape=(asm.ext_size, asm.ext_size),
    ).tocsr()
    target = np.zeros(asm.ext_size)
    target[xrows] = U0[xrows]

    def fun(U):
        R, J = asm.residual(U, with_jacobian=True)
        return E @ R + S @ U - target, (E @ J + S).tocsr()

    U, rep = solve_system(fun, U0, settings, make_state=lambda U: DiscreteState(L, U[: asm.size].copy()))
    return DiscreteState(L, U[: asm.size].copy()), rep


def leak_salt(problem: Problem):
    for bc in problem.bcs.tags.values():
        for i, s in enumerate(bc.salts):
            if isinstance(s, LeakProfile):
                return i
    return None


__all__ = [
    "Tableau",
    "RADAU_IIA_1",
    "RADAU_IIA_2",
    "TABLEAUX",
    "get_tableau",
    "dense_irk_step",
    "dense_irk",
    "observed_order",
    "TimeStepper",
    "StageSystem",
    "transient_residual",
    "StepReport",
    "TransientReport",
    "ensure_reference_moles",
    "step",
    "run",
    "conservation_report",
    "consistent_initialization",
    "factorize",
]
