"""Quadrature on the reference triangle (0,0),(1,0),(0,1) and on [0, 1]."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray  # (q, dim)
    weights: np.ndarray  # (q,)
    degree: int


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadratureRule:
    """Collapsed Gauss-Jacobi rule exact for polynomials of total degree ``degree``."""
    m = degree // 2 + 1
    s, ws = roots_legendre(m)
    s = 0.5 * (s + 1)
    ws = 0.5 * ws
    # weight (1 - t) on [0, 1] from Jacobi(alpha=1, beta=0) on [-1, 1]
    t, wt = roots_jacobi(m, 1.0, 0.0)
    t = 0.5 * (t + 1)
    wt = wt / 4.0
    T, S = np.meshgrid(t, s, indexing="ij")
    WT, WS = np.meshgrid(wt, ws, indexing="ij")
    x = (S * (1 - T)).ravel()
    y = T.ravel()
    pts = np.stack([x, y], axis=1)
    w = (WT * WS).ravel()
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(pts, w, degree)


@lru_cache(maxsize=None)
def interval_rule(degree: int) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1] exact for degree ``degree``."""
    m = degree // 2 + 1
    s, w = roots_legendre(m)
    pts = (0.5 * (s + 1))[:, None]
    w = 0.5 * w
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(pts, w, degree)
