"""Triangular meshes with tagged boundary edges, generators and text I/O."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import MeshError

# local edge i is opposite local vertex i
LOCAL_EDGES = np.array([[1, 2], [2, 0], [0, 1]])


@dataclass(frozen=True, eq=False)
class Mesh2D:
    vertices: np.ndarray  # (nv, 2)
    triangles: np.ndarray  # (nt, 3), counter-clockwise
    boundary_edges: np.ndarray  # (nb, 2) vertex pairs
    boundary_tags: tuple  # (nb,) strings
    edges: np.ndarray = field(init=False, repr=False)  # (ne, 2), sorted low < high
    cell_edges: np.ndarray = field(init=False, repr=False)  # (nt, 3)
    edge_cells: np.ndarray = field(init=False, repr=False)  # (ne, 2), -1 for none
    boundary_edge_ids: np.ndarray = field(init=False, repr=False)  # (nb,) global edge ids

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=float)
        T = np.asarray(self.triangles, dtype=np.int64)
        B = np.asarray(self.boundary_edges, dtype=np.int64).reshape(-1, 2)
        tags = tuple(str(t) for t in self.boundary_tags)
        if V.ndim != 2 or V.shape[1] != 2 or T.ndim != 2 or T.shape[1] != 3:
            raise MeshError("vertices must be (N, 2) and triangles (M, 3)")
        if len(tags) != len(B):
            raise MeshError("one tag per boundary edge is required")
        if T.size and (T.min() < 0 or T.max() >= len(V)):
            raise MeshError("triangle references a missing vertex")
        area2 = _signed_area2(V, T)
        if np.any(area2 <= 0):
            raise MeshError("cells must be positively oriented and non-degenerate")
        loc = T[:, LOCAL_EDGES]  # (nt, 3, 2)
        keys = np.sort(loc.reshape(-1, 2), axis=1)
        edges, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
        inv = inv.reshape(-1)
        if np.any(counts > 2):
            raise MeshError("non-manifold edge shared by more than two cells")
        edge_cells = -np.ones((len(edges), 2), dtype=np.int64)
        owner = np.repeat(np.arange(len(T)), 3)
        for flat, e in enumerate(inv):
            slot = 0 if edge_cells[e, 0] < 0 else 1
            edge_cells[e, slot] = owner[flat]
        lookup = {tuple(e): i for i, e in enumerate(edges)}
        bids = []
        for a, b in B:
            key = (min(a, b), max(a, b))
            if key not in lookup:
                raise MeshError(f"tagged boundary edge {key} is not a mesh edge")
            bids.append(lookup[key])
        bids = np.array(bids, dtype=np.int64)
        on_boundary = np.flatnonzero(counts == 1)
        if len(set(bids.tolist())) != len(bids) or set(bids.tolist()) != set(on_boundary.tolist()):
            raise MeshError("every boundary edge must be tagged exactly once")
        for name, val in (
            ("vertices", V),
            ("triangles", T),
            ("boundary_edges", B),
            ("boundary_tags", tags),
            ("edges", edges),
            ("cell_edges", inv.reshape(-1, 3)),
            ("edge_cells", edge_cells),
            ("boundary_edge_ids", bids),
        ):
            object.__setattr__(self, name, val)

    @property
    def n_cells(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def tags(self) -> list[str]:
        return sorted(set(self.boundary_tags))

    def cell_areas(self) -> np.ndarray:
        return 0.5 * _signed_area2(self.vertices, self.triangles)

    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def edge_normals(self) -> np.ndarray:
        """Unit normals of edges oriented low -> high vertex, rotated clockwise."""
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        L = np.hypot(d[:, 0], d[:, 1])[:, None]
        return np.stack([d[:, 1], -d[:, 0]], axis=1) / L

    def boundary_outward_sign(self) -> np.ndarray:
        """+1 where the global edge normal points out of the domain, per boundary edge."""
        eids = self.boundary_edge_ids
        cells = self.edge_cells[eids, 0]
        centroid = self.vertices[self.triangles[cells]].mean(axis=1)
        mid = self.vertices[self.edges[eids]].mean(axis=1)
        n = self.edge_normals()[eids]
        return np.where(np.einsum("ij,ij->i", mid - centroid, n) > 0, 1.0, -1.0)

    def boundary_normals(self) -> np.ndarray:
        return self.edge_normals()[self.boundary_edge_ids] * self.boundary_outward_sign()[:, None]

    def max_diameter(self) -> float:
        return float(self.edge_lengths().max())

    def tagged(self, tag) -> np.ndarray:
        """Indices into the boundary-edge list carrying ``tag``."""
        return np.array([i for i, t in enumerate(self.boundary_tags) if t == tag], dtype=np.int64)

    def with_tags(self, retag) -> "Mesh2D":
        """Copy with boundary tags replaced by ``retag(midpoint, old_tag)``."""
        mids = self.vertices[self.boundary_edges].mean(axis=1)
        tags = [retag(m, t) for m, t in zip(mids, self.boundary_tags)]
        return Mesh2D(self.vertices, self.triangles, self.boundary_edges, tags)


def _signed_area2(V, T):
    a, b, c = V[T[:, 0]], V[T[:, 1]], V[T[:, 2]]
    return (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])


def _structured(X, Y, diagonal, tag_of):
    """Triangulate a logically rectangular (nx+1, ny+1) grid of points."""
    nx, ny = X.shape[0] - 1, X.shape[1] - 1
    verts = [np.stack([X.ravel(), Y.ravel()], axis=1)]
    idx = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)
    tris = []
    nv = verts[0].shape[0]
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]
            if diagonal == "crossed":
                m = nv
                nv += 1
                verts.append(np.array([[X[i:i + 2, j:j + 2].mean(), Y[i:i + 2, j:j + 2].mean()]]))
                tris += [[a, b, m], [b, c, m], [c, d, m], [d, a, m]]
            elif diagonal == "left" or (diagonal == "alternate" and (i + j) % 2):
                tris += [[a, b, d], [b, c, d]]
            else:
                tris += [[a, b, c], [a, c, d]]
    V = np.concatenate(verts)
    T = np.array(tris, dtype=np.int64)
    # orient
    neg = _signed_area2(V, T) < 0
    T[neg] = T[neg][:, [0, 2, 1]]
    bedges, btags = [], []
    for i in range(nx):
        bedges += [[idx[i, 0], idx[i + 1, 0]], [idx[i, ny], idx[i + 1, ny]]]
        btags += [tag_of("bottom"), tag_of("top")]
    for j in range(ny):
        bedges += [[idx[0, j], idx[0, j + 1]], [idx[nx, j], idx[nx, j + 1]]]
        btags += [tag_of("left"), tag_of("right")]
    return Mesh2D(V, T, np.array(bedges), btags)


def rectangle_mesh(nx, ny, lx=1.0, ly=1.0, diagonal="right", tags=None) -> Mesh2D:
    """Uniform triangulation of [0, lx] x [0, ly]; sides tagged left/right/bottom/top."""
    tags = dict(tags or {})
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return _structured(X, Y, diagonal, lambda s: tags.get(s, s))


def graded(n, grading):
    """Points on [0, 1] clustered towards both ends; grading=1 is uniform."""
    s = np.linspace(0.0, 1.0, n + 1)
    if grading == 1.0:
        return s
    g = float(grading)
    u = 2 * s - 1
    return 0.5 * (1 + np.sign(u) * (1 - (1 - np.abs(u)) ** g))


def trapezoid_mesh(nx, ny, corners=((0, 0), (0, 5), (5, 5), (10, 0)), grading=1.0, tags=None) -> Mesh2D:
    """Bilinear image of a graded grid on a quadrilateral.

    ``corners`` are given as (p00, p01, p11, p10): the side p00-p01 is tagged
    ``electrode_p``, the side p11-p10 ``electrode_n``, the rest ``wall``.
    """
    tags = dict({"left": "electrode_p", "right": "electrode_n", "bottom": "wall", "top": "wall"}, **(tags or {}))
    p00, p01, p11, p10 = (np.asarray(c, dtype=float) for c in corners)
    s = graded(nx, grading)[:, None]
    t = graded(ny, grading)[None, :]
    P = (
        (1 - s)[..., None] * (1 - t)[..., None] * p00
        + (1 - s)[..., None] * t[..., None] * p01
        + s[..., None] * t[..., None] * p11
        + s[..., None] * (1 - t)[..., None] * p10
    )
    return _structured(P[..., 0], P[..., 1], "alternate", lambda side: tags[side])


def annulus_box_mesh(n_theta=16, n_r=4, radius=0.25, half_width=1.0, tags=None) -> Mesh2D:
    """Square box with a circular hole at the origin (O-grid).

    Sides tagged ``left``/``right``/``bottom``/``top`` and ``disk`` unless
    remapped by ``tags``.
    """
    tags = dict(tags or {})
    if n_theta % 4:
        raise MeshError("n_theta must be divisible by 4")
    th = np.linspace(0.0, 2 * np.pi, n_theta + 1)[:-1] + np.pi / 4
    inner = radius * np.stack([np.cos(th), np.sin(th)], axis=1)
    outer = inner / np.max(np.abs(inner), axis=1, keepdims=True) * half_width
    r = np.linspace(0.0, 1.0, n_r + 1)
    pts = (1 - r)[:, None, None] * inner[None] + r[:, None, None] * outer[None]
    V = pts.reshape(-1, 2)
    idx = np.arange(len(V)).reshape(n_r + 1, n_theta)
    tris = []
    for i in range(n_r):
        for j in range(n_theta):
            jn = (j + 1) % n_theta
            a, b, c, d = idx[i, j], idx[i + 1, j], idx[i + 1, jn], idx[i, jn]
            tris += [[a, b, c], [a, c, d]]
    T = np.array(tris, dtype=np.int64)
    neg = _signed_area2(V, T) < 0
    T[neg] = T[neg][:, [0, 2, 1]]
    bedges, btags = [], []
    for j in range(n_theta):
        jn = (j + 1) % n_theta
        bedges.append([idx[0, j], idx[0, jn]])
        btags.append(tags.get("disk", "disk"))
        a, b = idx[n_r, j], idx[n_r, jn]
        m = 0.5 * (V[a] + V[b])
        if abs(m[0]) > abs(m[1]):
            side = "right" if m[0] > 0 else "left"
        else:
            side = "top" if m[1] > 0 else "bottom"
        bedges.append([a, b])
        btags.append(tags.get(side, side))
    return Mesh2D(V, T, np.array(bedges), btags)


def refine(mesh: Mesh2D) -> Mesh2D:
    """Uniform red refinement: each triangle split into four."""
    nv = mesh.n_vertices
    mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    V = np.concatenate([mesh.vertices, mids])
    tris = []
    for t, ce in zip(mesh.triangles, mesh.cell_edges):
        m0, m1, m2 = nv + ce  # midpoints opposite vertices 0, 1, 2
        tris += [[t[0], m2, m1], [m2, t[1], m0], [m1, m0, t[2]], [m0, m1, m2]]
    bedges, btags = [], []
    for (a, b), eid, tag in zip(mesh.boundary_edges, mesh.boundary_edge_ids, mesh.boundary_tags):
        m = nv + eid
        bedges += [[a, m], [m, b]]
        btags += [tag, tag]
    return Mesh2D(V, np.array(tris), np.array(bedges), btags)


def write_mesh(mesh: Mesh2D, path) -> None:
    lines = [f"vertices {mesh.n_vertices}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines.append(f"triangles {mesh.n_cells}")
    lines += [" ".join(str(v) for v in t) for t in mesh.triangles.tolist()]
    lines.append(f"boundary {len(mesh.boundary_edges)}")
    lines += [f"{a} {b} {t}" for (a, b), t in zip(mesh.boundary_edges.tolist(), mesh.boundary_tags)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh2D:
    tokens = Path(path).read_text().split("\n")
    lines = [ln.split() for ln in tokens if ln.strip()]
    pos = 0

    def section(name):
        nonlocal pos
        head = lines[pos]
        if len(head) != 2 or head[0] != name:
            raise MeshError(f"expected '{name} <count>' at line {pos + 1}")
        count = int(head[1])
        rows = lines[pos + 1:pos + 1 + count]
        if len(rows) != count:
            raise MeshError(f"section '{name}' is truncated")
        pos += count + 1
        return rows

    try:
        V = np.array([[float(a), float(b)] for a, b in section("vertices")])
        T = np.array([[int(a) for a in r] for r in section("triangles")], dtype=np.int64)
        brows = section("boundary")
    except (ValueError, IndexError) as exc:
        raise MeshError(f"malformed mesh file: {exc}") from exc
    B = np.array([[int(r[0]), int(r[1])] for r in brows], dtype=np.int64)
    tags = [r[2] for r in brows]
    return Mesh2D(V.reshape(-1, 2), T.reshape(-1, 3), B, tags)
