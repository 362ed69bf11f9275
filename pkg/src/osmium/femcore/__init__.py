"""Meshes, quadrature, reference elements and global spaces."""
from .mesh import Mesh2D, annulus_box_mesh, read_mesh, rectangle_mesh, refine, trapezoid_mesh, write_mesh
from .quadrature import QuadratureRule, interval_rule, triangle_rule
from .spaces import (
    SpaceSetup,
    assemble_mass_matrix,
    build_spaces,
    normalize_mole_fractions,
    reconstruct,
    trace_project,
)

__all__ = [
    "Mesh2D",
    "annulus_box_mesh",
    "read_mesh",
    "rectangle_mesh",
    "refine",
    "trapezoid_mesh",
    "write_mesh",
    "QuadratureRule",
    "interval_rule",
    "triangle_rule",
    "SpaceSetup",
    "assemble_mass_matrix",
    "build_spaces",
    "normalize_mole_fractions",
    "reconstruct",
    "trace_project",
]
