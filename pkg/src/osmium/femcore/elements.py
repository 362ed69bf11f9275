"""Reference elements on the triangle (0,0),(1,0),(0,1).

Lagrange elements of degree 0-3 (nodal on the equispaced lattice) and
Raviart-Thomas elements of order 1 and 2 whose degrees of freedom are normal
moments on edges plus interior moments.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .quadrature import interval_rule, triangle_rule

REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
# edge i runs from vertex (i+1)%3 to (i+2)%3, outward normals below
REF_NORMALS = np.array([[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]) / np.array([[np.sqrt(2)], [1.0], [1.0]])
REF_EDGE_LENGTHS = np.array([np.sqrt(2), 1.0, 1.0])


def edge_points(i, s):
    """Points on reference edge ``i`` at parameters ``s`` in [0, 1]."""
    a = REF_VERTICES[(i + 1) % 3]
    b = REF_VERTICES[(i + 2) % 3]
    s = np.asarray(s, dtype=float).reshape(-1, 1)
    return (1 - s) * a + s * b


def _monomials(deg):
    return [(i, d - i) for d in range(deg + 1) for i in range(d, -1, -1)]


def _eval_monomials(exps, pts):
    x, y = pts[:, 0], pts[:, 1]
    val = np.stack([x**a * y**b for a, b in exps], axis=1)
    dx = np.stack([a * x ** max(a - 1, 0) * y**b if a else 0 * x for a, b in exps], axis=1)
    dy = np.stack([b * x**a * y ** max(b - 1, 0) if b else 0 * x for a, b in exps], axis=1)
    return val, dx, dy


@dataclass(frozen=True, eq=False)
class LagrangeElement:
    degree: int
    nodes: np.ndarray  # (nloc, 2) reference nodes
    lattice: np.ndarray  # (nloc, 3) integer barycentric lattice coordinates
    coeffs: np.ndarray  # monomial coefficients, (nmono, nloc)

    @property
    def dim(self):
        return len(self.nodes)

    def tabulate(self, pts):
        """Values (q, nloc) and reference gradients (q, nloc, 2)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        val, dx, dy = _eval_monomials(_monomials(self.degree), pts)
        return val @ self.coeffs, np.stack([dx @ self.coeffs, dy @ self.coeffs], axis=-1)


@lru_cache(maxsize=None)
def lagrange(degree: int) -> LagrangeElement:
    if degree == 0:
        nodes = np.array([[1 / 3, 1 / 3]])
        return LagrangeElement(0, nodes, np.array([[0, 0, 0]]), np.ones((1, 1)))
    m = degree
    lat = []
    # vertices first, then edge nodes (edge i, from its start vertex), then interior
    for v in range(3):
        b = [0, 0, 0]
        b[v] = m
        lat.append(b)
    for e in range(3):
        a, c = (e + 1) % 3, (e + 2) % 3
        for j in range(1, m):
            b = [0, 0, 0]
            b[a], b[c] = m - j, j
            lat.append(b)
    for i in range(1, m):
        for j in range(1, m - i):
            lat.append([m - i - j, i, j])
    lat = np.array(lat)
    nodes = lat[:, 1:] / m  # barycentric (l0, l1, l2) -> (x, y) = (l1, l2)
    val, _, _ = _eval_monomials(_monomials(m), nodes)
    coeffs = np.linalg.inv(val)
    return LagrangeElement(m, nodes, lat, coeffs)


@dataclass(frozen=True, eq=False)
class RTElement:
    """Raviart-Thomas element of order k (k=1 lowest order)."""

    order: int
    coeffs: np.ndarray  # (nspan, nloc)
    n_edge: int  # dofs per edge
    n_interior: int

    @property
    def dim(self):
        return 3 * self.n_edge + self.n_interior

    def tabulate(self, pts):
        """Values (q, nloc, 2) and reference divergences (q, nloc)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        val, div = _rt_span(self.order, pts)
        return np.einsum("qsc,sl->qlc", val, self.coeffs), div @ self.coeffs


def _rt_span(k, pts):
    """Spanning vector fields of RT_k and their divergences."""
    x, y = pts[:, 0], pts[:, 1]
    one, zero = np.ones_like(x), np.zeros_like(x)
    if k == 1:
        fields = [(one, zero), (zero, one), (x, y)]
        div = [zero, zero, 2 * one]
    elif k == 2:
        fields = [(one, zero), (x, zero), (y, zero), (zero, one), (zero, x), (zero, y), (x * x, x * y), (x * y, y * y)]
        div = [zero, one, zero, zero, zero, one, 3 * x, 3 * y]
    else:
        raise ValueError(k)
    val = np.stack([np.stack(f, axis=-1) for f in fields], axis=1)
    return val, np.stack(div, axis=1)


@lru_cache(maxsize=None)
def raviart_thomas(order: int) -> RTElement:
    k = order
    nspan = {1: 3, 2: 8}[k]
    rule = interval_rule(2 * k + 2)
    s = rule.points[:, 0]
    rows = []
    for e in range(3):
        pts = edge_points(e, s)
        val, _ = _rt_span(k, pts)
        flux = val @ REF_NORMALS[e]  # (q, nspan)
        w = rule.weights * REF_EDGE_LENGTHS[e]
        rows.append(w @ flux)
        if k == 2:
            rows.append((w * (2 * s - 1)) @ flux)
    if k == 2:
        tri = triangle_rule(4)
        val, _ = _rt_span(k, tri.points)
        rows.append(tri.weights @ val[:, :, 0])
        rows.append(tri.weights @ val[:, :, 1])
    D = np.array(rows)  # (ndof, nspan)
    coeffs = np.linalg.inv(D)
    # reorder: dofs are grouped edge-major already; [e0q0, e0q1, e1q0, ...]
    return RTElement(k, coeffs, k, 0 if k == 1 else 2)
