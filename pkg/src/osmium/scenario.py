"""JSON scenario files: loading, defaults, SI-to-nondimensional conversion.

A scenario is a JSON object. Physical inputs are SI (see SCHEMA for units);
``resolve`` fills every default so that the echoed configuration reloads to
the identical resolved dictionary.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, OsmiumError
from .femcore import annulus_box_mesh, build_spaces, read_mesh, rectangle_mesh, trapezoid_mesh
from .saltcharge import build_transform, validate_basis
from .species import Species, validate_system
from .steady.constraints import analyze_constraints
from .steady.newton import NewtonSettings
from .steady.problem import (
    BoundaryConditionSet,
    ConstraintSet,
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
from .thermo import (
    CompressibleEOS,
    ConcentrationPolynomialEOS,
    ConstantViscosity,
    ConstantVolumeEOS,
    DensityPolynomialEOS,
    IdealFactors,
    MaterialModel,
    SaltPolynomialViscosity,
    SolventPolynomialViscosity,
)
from .transient import TimeStepper
from .transport import ConstantDiffusivity, PowerLawDiffusivity

# key -> unit, documented in the README and docs
SCHEMA = {
    "name": "free text",
    "species[].name / molar_mass / charge": "- / kg/mol / elementary charges",
    "basis": "null (automatic) or n-1 integer reaction vectors",
    "scales.L / c_ref / D_ref / T": "m / mol/m^3 / m^2/s / K",
    "material.eos": "constant_volume {V: m^3/mol per salt} | density_polynomial {coeffs: kg/m^3, salt} | "
                    "concentration_polynomial {coeffs: mol/m^3, salt} | compressible {base, kappa: 1/Pa}",
    "material.diffusivity": "constant {D: m^2/s} | power_law {D0: m^2/s, exponents, salt, x_ref}",
    "material.viscosity": "constant {eta, zeta: Pa s} | salt_polynomial {coeffs: Pa s, salt, zeta_ratio} | "
                          "solvent_polynomial {coeffs: Pa s, first, second, zeta_ratio}",
    "material.box_lo / box_hi": "bounds on x_nu (null for none)",
    "geometry": "rectangle {nx, ny, lx, ly: m, diagonal} | trapezoid {nx, ny, vertices: m, grading} | "
                "annulus_box {n_theta, n_r, radius, half_width: m} | mesh_file {path, unit: m per file unit}; "
                "optional refine (int) and tags (side -> tag)",
    "order": "1 or 2",
    "gamma": "augmentation parameter (nondimensional)",
    "forcing": "body force per unit mass, m/s^2",
    "boundary.<tag>.salts[]": "zero_flux | flux {value: mol/m^2/s} | leak | proportional_to_current {alpha} | "
                              "weak_dirichlet {value: mole fraction}",
    "boundary.<tag>.current": "zero | given {value: A/m^2} | linear_bv {i0: A/m^2, alpha_sum, V_e: V} | "
                              "tanh_bv {i0: A/m^2, x_ref, V_e: V, salt, s} | proportional_to_salt_flux {salt, factor}",
    "boundary.<tag>.tangential": "{vector: m/s, omega: rad/s, center: m}",
    "constraints": "'auto' or list of normalization | mean_pressure {value: Pa} | mean_potential {value: V} | "
                   "total_moles {salt, mean_concentration: mol/m^3 or 'initial'} | total_mass {mean_density: kg/m^3}",
    "initial.x_nu": "uniform transformed mole fractions",
    "initial.potential_guess / consistent": "bool / bool",
    "solver.tol / max_iter / line_search / quad_degree": "residual norm / int / bool / null or int",
    "time.scheme / dt / steps": "RadauIIA-1|RadauIIA-2 / s / int",
    "output.snapshot_every / vtk": "steps (0: final only) / bool",
    "manufactured.case / levels / base": "diffusion|stokes / int / int",
}

DEFAULTS = {
    "name": "",
    "basis": None,
    "scales": {"L": 1e-3, "c_ref": 1e4, "D_ref": 1e-10, "T": 298.15},
    "order": 1,
    "gamma": 1e-2,
    "forcing": [0.0, 0.0],
    "constraints": "auto",
    "initial": {"potential_guess": True, "consistent": False},
    "solver": {"tol": 1e-10, "max_iter": 25, "line_search": False, "quad_degree": None},
    "time": {"scheme": "RadauIIA-2", "dt": 864.0, "steps": 20},
    "output": {"snapshot_every": 0, "vtk": True},
    "manufactured": None,
}

_GEOMETRY_DEFAULTS = {
    "rectangle": {"nx": 4, "ny": 4, "lx": 1e-3, "ly": 1e-3, "diagonal": "right"},
    "trapezoid": {"nx": 14, "ny": 14, "vertices": [[0, 0], [0, 5e-3], [5e-3, 5e-3], [10e-3, 0]], "grading": 1.0},
    "annulus_box": {"n_theta": 16, "n_r": 4, "radius": 2.5e-4, "half_width": 1e-3},
    "mesh_file": {"unit": 1.0},
}


def _merge(defaults, given):
    out = copy.deepcopy(defaults)
    for k, v in (given or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve(raw: dict) -> dict:
    """Fill defaults; the result is a plain JSON-compatible dict."""
    if not isinstance(raw, dict):
        raise ConfigError("a scenario must be a JSON object")
    if not raw.get("manufactured"):
        for key in ("species", "material", "geometry", "boundary"):
            if key not in raw:
                raise ConfigError(f"scenario is missing the '{key}' section")
    cfg = _merge(DEFAULTS, raw)
    geo = cfg.get("geometry")
    if isinstance(geo, dict):
        kind = geo.get("kind")
        if kind not in _GEOMETRY_DEFAULTS:
            raise ConfigError(f"unknown geometry kind {kind!r}")
        cfg["geometry"] = _merge(dict(_GEOMETRY_DEFAULTS[kind], kind=kind, refine=0, tags={}), geo)
    unknown = set(cfg) - set(DEFAULTS) - {"species", "material", "geometry", "boundary"}
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    return json.loads(json.dumps(cfg))


def load_scenario(source) -> "Scenario":
    """Scenario from a path, a JSON string or a dict."""
    if isinstance(source, dict):
        raw, path = source, None
    else:
        p = Path(source)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read scenario {source}: {exc}") from exc
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"scenario {source} is not valid JSON: {exc}") from exc
        path = p
        geo = raw.get("geometry") if isinstance(raw, dict) else None
        if isinstance(geo, dict) and geo.get("kind") == "mesh_file" and "path" in geo:
            geo["path"] = str((p.parent / geo["path"]).resolve())
    return Scenario(resolve(raw), path)


@dataclass
class RunSetup:
    problem: Problem
    analysis: object
    initial: object
    newton: NewtonSettings
    stepper: TimeStepper


@dataclass
class Scenario:
    config: dict
    path: Path | None = None

    def echo(self) -> str:
        return json.dumps(self.config, indent=2, sort_keys=True) + "\n"

    @property
    def name(self):
        return self.config["name"] or (self.path.stem if self.path else "scenario")

    @property
    def is_manufactured(self):
        return bool(self.config.get("manufactured"))

    def scales(self) -> Scales:
        s = self.config["scales"]
        try:
            sc = Scales(float(s["L"]), float(s["c_ref"]), float(s["D_ref"]), float(s["T"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad scales section: {exc}") from exc
        if min(sc.L, sc.c_ref, sc.D_ref, sc.T) <= 0:
            raise ConfigError("reference scales must be positive")
        return sc

    def build_newton(self) -> NewtonSettings:
        s = self.config["solver"]
        try:
            return NewtonSettings(tol=float(s["tol"]), max_iter=int(s["max_iter"]), line_search=bool(s["line_search"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad solver section: {exc}") from exc

    def build(self, regime="steady") -> RunSetup:
        try:
            return self._build(regime)
        except OsmiumError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{type(exc).__name__}: {exc}") from exc
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ConfigError(f"invalid scenario: {type(exc).__name__}: {exc}") from exc

    # ------------------------------------------------------------------
    def _build(self, regime):
        cfg = self.config
        sc = self.scales()
        system = validate_system([Species(s["name"], float(s["molar_mass"]), s["charge"]) for s in cfg["species"]])
        basis = build_transform(system, None if cfg["basis"] is None else validate_basis(system, cfg["basis"]))
        material = _material(cfg["material"], basis)
        mesh = _mesh(cfg["geometry"], sc)
        setup = build_spaces(mesh, int(cfg["order"]), cfg["solver"]["quad_degree"])
        bcs = BoundaryConditionSet({t: _tag_bc(b, basis, sc) for t, b in cfg["boundary"].items()})
        bcs.validate(mesh, basis.n - 1)
        analysis = analyze_constraints(basis, bcs, material.eos.kind, regime)
        if cfg["constraints"] == "auto":
            constraints = analysis.constraints
        else:
            constraints = _explicit_constraints(cfg["constraints"], analysis, bcs, sc)
        f = np.asarray(cfg["forcing"], dtype=float) * sc.L / sc.U**2
        problem = Problem(setup, basis, material, bcs, constraints, scales=sc, gamma=float(cfg["gamma"]),
                          forcing=tuple(f))
        x0 = cfg["initial"].get("x_nu")
        if x0 is None:
            raise ConfigError("initial.x_nu is required")
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (basis.n - 1,):
            raise ConfigError(f"initial.x_nu needs {basis.n - 1} entries")
        if abs(x0 @ basis.nu_Z - 1) > 1e-12:
            raise ConfigError("initial.x_nu must satisfy nu_Z . x_nu = 1")
        material.check_domain(basis, x0)
        material.self_check(basis, sc.T, [x0])
        initial = problem.uniform_state(x0)
        newton = self.build_newton()
        t = cfg["time"]
        stepper = TimeStepper(t["scheme"], dt=float(t["dt"]), steps=int(t["steps"]), newton=newton,
                              potential_guess=bool(cfg["initial"]["potential_guess"]))
        return RunSetup(problem, analysis, initial, newton, stepper)


def _poly(v):
    return tuple(float(a) for a in v)


def _material(m, basis):
    eos = _eos(m["eos"], basis)
    d = m["diffusivity"]
    if d["kind"] == "constant":
        D = ConstantDiffusivity(np.asarray(d["D"], dtype=float))
    elif d["kind"] == "power_law":
        D = PowerLawDiffusivity(np.asarray(d["D0"], dtype=float), np.asarray(d["exponents"], dtype=float),
                                int(d["salt"]), float(d["x_ref"]))
    else:
        raise ConfigError(f"unknown diffusivity kind {d['kind']!r}")
    if np.shape(getattr(D, "D", getattr(D, "D0", None))) != (basis.n, basis.n):
        raise ConfigError(f"diffusivity matrix must be {basis.n} x {basis.n}")
    v = m["viscosity"]
    if v["kind"] == "constant":
        visc = ConstantViscosity(float(v["eta"]), float(v["zeta"]))
    elif v["kind"] == "salt_polynomial":
        visc = SaltPolynomialViscosity(_poly(v["coeffs"]), int(v["salt"]), float(v.get("zeta_ratio", 1.0)))
    elif v["kind"] == "solvent_polynomial":
        visc = SolventPolynomialViscosity(tuple(_poly(r) for r in v["coeffs"]), int(v["first"]), int(v["second"]),
                                          float(v.get("zeta_ratio", 1.0)))
    else:
        raise ConfigError(f"unknown viscosity kind {v['kind']!r}")
    factors = m.get("factors", "ideal")
    if factors != "ideal":
        raise ConfigError("only ideal thermodynamic factors are bundled")
    lo, hi = m.get("box_lo"), m.get("box_hi")
    return MaterialModel(eos, D, visc, IdealFactors(), None if lo is None else np.asarray(lo, dtype=float),
                         None if hi is None else np.asarray(hi, dtype=float))


def _eos(e, basis):
    kind = e["kind"]
    if kind == "constant_volume":
        return ConstantVolumeEOS(np.asarray(e["V"], dtype=float), basis.nu_Z)
    if kind == "density_polynomial":
        return DensityPolynomialEOS(_poly(e["coeffs"]), int(e["salt"]), basis.salt_molar_masses, basis.nu_Z)
    if kind == "concentration_polynomial":
        return ConcentrationPolynomialEOS(_poly(e["coeffs"]), int(e["salt"]), basis.nu_Z)
    if kind == "compressible":
        return CompressibleEOS(_eos(e["base"], basis), float(e["kappa"]))
    raise ConfigError(f"unknown equation of state kind {kind!r}")


def _mesh(g, sc):
    kind = g["kind"]
    L = sc.L
    tags = g.get("tags") or None
    if kind == "rectangle":
        mesh = rectangle_mesh(int(g["nx"]), int(g["ny"]), g["lx"] / L, g["ly"] / L, g["diagonal"], tags)
    elif kind == "trapezoid":
        v = np.asarray(g["vertices"], dtype=float) / L
        if v.shape != (4, 2):
            raise ConfigError("trapezoid needs four vertices")
        mesh = trapezoid_mesh(int(g["nx"]), int(g["ny"]), tuple(map(tuple, v)), float(g["grading"]), tags)
    elif kind == "annulus_box":
        mesh = annulus_box_mesh(int(g["n_theta"]), int(g["n_r"]), g["radius"] / L, g["half_width"] / L, tags)
    elif kind == "mesh_file":
        m = read_mesh(g["path"])
        from .femcore import Mesh2D

        mesh = Mesh2D(m.vertices * float(g["unit"]) / L, m.triangles, m.boundary_edges, m.boundary_tags)
        if tags:
            mesh = mesh.with_tags(lambda mid, t: tags.get(t, t))
    else:
        raise ConfigError(f"unknown geometry kind {kind!r}")
    from .femcore import refine

    for _ in range(int(g.get("refine", 0))):
        mesh = refine(mesh)
    return mesh


def _salt_bc(s, sc):
    kind = s["kind"]
    if kind == "zero_flux":
        return ZeroFlux()
    if kind == "flux":
        return GivenFlux(float(s["value"]) / sc.N_ref)
    if kind == "leak":
        return LeakProfile()
    if kind == "proportional_to_current":
        return ProportionalToCurrent(float(s["alpha"]))
    if kind == "weak_dirichlet":
        return WeakDirichlet(float(s["value"]))
    raise ConfigError(f"unknown salt condition {kind!r}")


def _current_bc(c, sc):
    kind = c["kind"]
    VT = sc.thermal_voltage
    if kind == "zero":
        return ZeroCurrent()
    if kind == "given":
        return GivenCurrent(float(c["value"]) / sc.current)
    if kind == "linear_bv":
        return LinearButlerVolmer(float(c["i0"]) / sc.current, float(c["alpha_sum"]), float(c["V_e"]) / VT)
    if kind == "tanh_bv":
        return TanhButlerVolmer(float(c["i0"]) / sc.current, float(c["x_ref"]), float(c["V_e"]) / VT, int(c["salt"]),
                                float(c.get("s", 0.5)))
    if kind == "proportional_to_salt_flux":
        return ProportionalToSaltFlux(int(c["salt"]), float(c["factor"]))
    raise ConfigError(f"unknown current condition {kind!r}")


def _tag_bc(b, basis, sc):
    salts = b.get("salts")
    if not isinstance(salts, list) or len(salts) != basis.n - 1:
        raise ConfigError(f"each boundary tag needs {basis.n - 1} salt conditions")
    t = b.get("tangential") or {}
    # tangential velocity in m/s and rad/s, center in m
    tang = Tangential(
        tuple(float(a) / sc.U for a in t.get("vector", (0.0, 0.0))),
        float(t.get("omega", 0.0)) * sc.t_ref,
        tuple(float(a) / sc.L for a in t.get("center", (0.0, 0.0))),
    )
    return TagBC(tuple(_salt_bc(s, sc) for s in salts), _current_bc(b.get("current", {"kind": "zero"}), sc), tang)


def _explicit_constraints(items, analysis, bcs, sc):
    """Build an explicit constraint list; multiplier slots are assigned by type."""
    if not isinstance(items, list):
        raise ConfigError("constraints must be 'auto' or a list")
    free = list(analysis.constraints.slots)
    free = [s for s in free if s is not None]
    out, slots = [], []

    def take(slot):
        if slot in free:
            free.remove(slot)
            return slot
        return None

    norm_pending = False
    for it in items:
        kind = it["kind"]
        if kind == "normalization":
            out.append(Normalization())
            slots.append("?")
            norm_pending = True
        elif kind == "mean_pressure":
            out.append(MeanPressure(float(it.get("value", 0.0)) / sc.P))
            slots.append(take("mavg"))
        elif kind == "total_mass":
            out.append(TotalMass(float(it["mean_density"])))
            slots.append(take("mavg"))
        elif kind == "mean_potential":
            out.append(MeanPotential(float(it.get("value", 0.0)) / sc.thermal_voltage))
            slots.append(take("cont:J"))
        elif kind == "total_moles":
            mc = it.get("mean_concentration", "initial")
            mc = mc if mc == "initial" else float(mc) / sc.c_ref
            out.append(TotalMoles(int(it["salt"]), mc))
            slots.append(take(f"cont:{int(it['salt'])}"))
        else:
            raise ConfigError(f"unknown constraint kind {kind!r}")
    if norm_pending:
        i = slots.index("?")
        if bcs.leak_tag is not None:
            slots[i] = None
        else:
            conts = [s for s in free if s.startswith("cont:") and s != "cont:J"]
            slots[i] = conts[0] if conts else (free[0] if free else None)
            if slots[i] in free:
                free.remove(slots[i])
    none_needed = int(bcs.leak_tag is not None)
    if sum(s is None for s in slots) != none_needed:
        raise ConfigError("could not place a multiplier for every explicit constraint; "
                          f"the analysis recommends: {', '.join(analysis.constraints.describe())}")
    return ConstraintSet(tuple(out), tuple(slots))

