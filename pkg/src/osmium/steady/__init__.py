"""Steady discrete problem: definition, assembly, constraints and Newton solver."""
from .problem import (  # noqa: F401
    BoundaryConditionSet,
    ConstraintSet,
    DiscreteState,
    GivenCurrent,
    GivenFlux,
    Layout,
    LeakProfile,
    LinearButlerVolmer,
    MeanPotential,
    MeanPressure,
    Normalization,
    Problem,
    ProportionalToCurrent,
    ProportionalToSaltFlux,
    Scales,
    TagBC,
    Tangential,
    TanhButlerVolmer,
    TotalMass,
    TotalMoles,
    WeakDirichlet,
    ZeroCurrent,
    ZeroFlux,
)
from .assembly import Assembler, assemble_jacobian, assemble_residual, fd_check, get_assembler  # noqa: F401
from .constraints import ConstraintAnalysis, analyze_constraints, check_well_posed  # noqa: F401
from .newton import NewtonReport, NewtonSettings, factorize, newton_solve  # noqa: F401
from .metrics import error_metrics, salt_moles, total_mass, weak_dirichlet_report  # noqa: F401
from .initial import potential_guess  # noqa: F401
