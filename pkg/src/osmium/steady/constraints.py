"""Counting and choosing the integral constraints that make a problem unique.

Each continuity-type row group whose constant-test-function equation is
implied by the others (the mass-average row always, the charge row when the
current data do not depend on the solution, salt rows whose boundary data are
fixed or proportional to the current) leaves one equation missing; a
multiplier is attached to that group and one integral constraint closes the
system. The normalization constraint is always part of the set.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

from ..errors import IllPosedWarning
from ..thermo import COMPOSITION, CONSTANT, PRESSURE
from .problem import (
    SOLUTION_DEPENDENT_CURRENT,
    BoundaryConditionSet,
    ConstraintSet,
    LeakProfile,
    MeanPotential,
    MeanPressure,
    Normalization,
    TotalMoles,
    WeakDirichlet,
)


@dataclass(frozen=True)
class ConstraintAnalysis:
    n: int
    regime: str
    k: int  # number of integral constraints (normalization included)
    l: int  # solution constraints implied by the compatibility conditions
    case: str
    constraints: ConstraintSet
    leak: bool
    warning: IllPosedWarning | None = None

    @property
    def well_posed(self):
        return self.warning is None

    def summary(self):
        names = ", ".join(self.constraints.describe())
        line = f"{self.regime} case ({self.case}): k = {self.k}, l = {self.l}; constraints: {names}"
        if self.leak:
            line += " (normalization absorbed by the leak amplitude)"
        if self.warning is not None:
            line += f"; WARNING: {self.warning}"
        return line


def _salt_slots(bcs: BoundaryConditionSet, n_salts):
    """Salts whose constant-test continuity equation is implied by the data."""
    out = []
    for i in range(n_salts):
        specs = [bc.salts[i] for bc in bcs.tags.values()]
        if any(isinstance(s, (LeakProfile, WeakDirichlet)) for s in specs):
            continue
        out.append(i)
    return out


def _current_is_fixed(bcs: BoundaryConditionSet):
    return not any(isinstance(bc.current, SOLUTION_DEPENDENT_CURRENT) for bc in bcs.tags.values())


def analyze_constraints(system, bcs: BoundaryConditionSet, eos_kind=CONSTANT, regime="steady") -> ConstraintAnalysis:
    """Required number of integral constraints and a recommended set.

    ``system`` is anything with an ``n`` attribute (species system or basis).
    """
    n = int(system.n)
    if regime not in ("steady", "transient"):
        raise ValueError(f"regime must be 'steady' or 'transient', got {regime!r}")
    if eos_kind not in (CONSTANT, COMPOSITION, PRESSURE):
        raise ValueError(f"unknown equation-of-state kind {eos_kind!r}")
    leak = bcs.leak_tag is not None
    current_fixed = _current_is_fixed(bcs)
    salts = _salt_slots(bcs, n - 1)
    confined = not leak and len(salts) == n - 1
    warning = None
    slots = ["mavg"]
    if current_fixed:
        slots.append("cont:J")
    if regime == "steady":
        cont = [f"cont:{i}" for i in salts]
        case = "i" if current_fixed else "ii"
    else:
        cont = []
        if eos_kind == CONSTANT:
            case = "i"
            if confined:
                cont = [f"cont:{salts[0]}"]
        elif eos_kind == COMPOSITION:
            case = "ii"
            if confined:
                warning = IllPosedWarning(
                    "composition-dependent partial molar volumes with confined boundaries and no leak: the "
                    "conserved totals over-determine the composition; add a leak condition or use a "
                    "pressure-dependent equation of state"
                )
        else:
            case = "iii"
    slots = slots + cont
    items, used = [], []
    # normalization first
    if leak:
        # the leak amplitude is the extra unknown closing the normalization row
        items.append(Normalization())
        used.append(None)
    elif cont:
        items.append(Normalization())
        used.append(cont[0])
        cont = cont[1:]
    else:
        items.append(Normalization())
        used.append("mavg")
    if "mavg" not in used:
        items.append(MeanPressure(0.0))
        used.append("mavg")
    if current_fixed:
        items.append(MeanPotential(0.0))
        used.append("cont:J")
    for c in cont:
        items.append(TotalMoles(int(c.split(":")[1]), "initial"))
        used.append(c)
    k = len(items)
    return ConstraintAnalysis(
        n=n,
        regime=regime,
        k=k,
        l=n + 1 - k,
        case=case,
        constraints=ConstraintSet(tuple(items), tuple(used)),
        leak=leak,
        warning=warning,
    )


def check_well_posed(analysis: ConstraintAnalysis, override=False):
    """Emit the ill-posedness warning; raise unless overridden."""
    from ..errors import IllPosedError

    if analysis.warning is None:
        return
    warnings.warn(analysis.warning, stacklevel=2)
    if not override:
        raise IllPosedError(str(analysis.warning))
