import sys

import numpy as np
import pytest

from osmium.saltcharge import build_transform
from osmium.species import Species, validate_system


def lipf6():
    return validate_system([Species("EMC", 0.104105, 0), Species("Li", 0.006935, 1), Species("PF6", 0.14497, -1)])


def five_species():
    return validate_system([
        Species("S", 0.09, 0),
        Species("A", 0.023, 1),
        Species("B", 0.035, -1),
        Species("C", 0.040, 2),
        Species("D", 0.096, -2),
    ])


@pytest.fixture
def system3():
    return lipf6()


@pytest.fixture
def basis3():
    return build_transform(lipf6())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


SPECIES3 = [{"name": "EMC", "molar_mass": 0.104105, "charge": 0},
            {"name": "Li", "molar_mass": 0.006935, "charge": 1},
            {"name": "PF6", "molar_mass": 0.14497, "charge": -1}]
D3 = [[1e-10, 1e-9, 1e-9], [1e-9, 1e-10, 2e-12], [1e-9, 2e-12, 1e-10]]


def box_scenario(current=None, eos=None, nx=3, order=1, **extra):
    """Small unit-box scenario dict; ``current`` maps left/right to current conditions."""
    zero = {"kind": "zero_flux"}
    prop = {"kind": "proportional_to_current", "alpha": 0.5}
    current = current or {}
    boundary = {}
    for tag in ("left", "right", "bottom", "top"):
        cur = current.get(tag, {"kind": "zero"})
        boundary[tag] = {"salts": [zero, prop if cur["kind"] != "zero" else zero], "current": cur}
    cfg = {
        "name": "box",
        "species": SPECIES3,
        "material": {"eos": eos or {"kind": "constant_volume", "V": [1.0e-4, 5.0e-5]},
                     "diffusivity": {"kind": "constant", "D": D3},
                     "viscosity": {"kind": "constant", "eta": 1e-3, "zeta": 1e-3}},
        "geometry": {"kind": "rectangle", "nx": nx, "ny": nx, "lx": 1e-3, "ly": 1e-3},
        "order": order,
        "boundary": boundary,
        "initial": {"x_nu": [0.85, 0.075]},
    }
    cfg.update(extra)
    return cfg


def random_state(problem, seed=0, amplitude=0.1):
    """Uniform composition plus noise on every unknown."""
    rng = np.random.default_rng(seed)
    state = problem.uniform_state([0.85, 0.075])
    L = problem.layout
    x_blk = np.zeros(L.size, dtype=bool)
    x_blk[L.block("x")] = True
    noise = rng.standard_normal(L.size)
    state.vec[~x_blk] = amplitude * noise[~x_blk]
    state.vec[x_blk] += 0.05 * amplitude * noise[x_blk]
    return state


def pytest_terminal_summary(terminalreporter):
    lines = getattr(sys.modules.get("test_acceptance"), "ACCEPTANCE_LINES", [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
