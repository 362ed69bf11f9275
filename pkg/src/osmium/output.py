"""Run outputs: CSV tables and legacy-ASCII VTK snapshots."""
from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .femcore.spaces import evaluate_rt, evaluate_scalar, reconstruct, tabulate_scalar


def write_csv(path, header, rows):
    """Write rows with a header; floats use repr so reruns are byte-identical."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    Path(path).write_text(buf.getvalue())


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _vertex_values(setup, space, coeffs):
    """Values of a continuous Lagrange field at mesh vertices (nodal bases interpolate)."""
    mesh = setup.mesh
    out = np.zeros(mesh.n_vertices)
    ref = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    val, _ = tabulate_scalar(setup, space, ref)
    vals = np.einsum("qa,ta->tq", val, np.asarray(coeffs)[space.cell_dofs])
    out[mesh.triangles] = vals
    return out


def _cell_average(setup, values):
    """Cell means of quadrature-point data (nt, q, ...)."""
    w = setup.dx
    return np.einsum("tq,tq...->t...", w, values) / w.sum(axis=1).reshape((-1,) + (1,) * (values.ndim - 2))


def snapshot_fields(state, problem):
    """Point fields (vertex values) and cell fields (averages) for export."""
    s = problem.setup
    n = problem.n
    point = {
        "velocity": np.stack([_vertex_values(s, s.V, state.v[c]) for c in range(2)], axis=1),
        "pressure": _vertex_values(s, s.P, state.p),
    }
    xi = reconstruct(s, state.x.T)  # (nR, n-1)
    xi = xi.reshape(s.R.ndofs, -1)
    nu_Z = problem.basis.nu_Z
    xt = xi / (xi @ nu_Z)[:, None]
    for i in range(n - 1):
        point[f"x_reconstructed_{i}"] = _vertex_values(s, s.R, xt[:, i])
    cell = {}
    for i in range(n - 1):
        cell[f"x_nu_{i}"] = _cell_average(s, evaluate_scalar(s, s.X, state.x[i]))
    cell["potential"] = _cell_average(s, evaluate_scalar(s, s.X, state.phi))
    for i in range(n):
        label = "current_flux" if i == n - 1 else f"flux_salt_{i}"
        cell[label] = _cell_average(s, evaluate_rt(s, state.N_Z[i])[0])
    return point, cell


def write_vtk(path, state, problem, title="osmium snapshot"):
    """Legacy ASCII VTK: continuous fields as POINT_DATA, DG fields and fluxes as CELL_DATA."""
    mesh = problem.setup.mesh
    point, cell = snapshot_fields(state, problem)
    L = problem.scales.L
    lines = ["# vtk DataFile Version 2.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {mesh.n_vertices} double")
    lines += [f"{x * L!r} {y * L!r} 0.0" for x, y in mesh.vertices.tolist()]
    nt = mesh.n_cells
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    lines.append(f"CELL_TYPES {nt}")
    lines += ["5"] * nt
    lines += _data_block("POINT_DATA", mesh.n_vertices, point)
    lines += _data_block("CELL_DATA", nt, cell)
    Path(path).write_text("\n".join(lines) + "\n")


def _data_block(kind, count, fields):
    out = [f"{kind} {count}"]
    for name, val in fields.items():
        val = np.asarray(val, dtype=float)
        if val.ndim == 2:
            out.append(f"VECTORS {name} double")
            out += [f"{a!r} {b!r} 0.0" for a, b in val.tolist()]
        else:
            out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            out += [repr(v) for v in val.tolist()]
    return out


def read_vtk_sections(path):
    """Minimal parser returning {section header: following-line count} for checks."""
    text = Path(path).read_text().splitlines()
    return {ln.split()[0]: int(ln.split()[1]) for ln in text if ln.split() and ln.split()[0] in
            ("POINTS", "CELLS", "CELL_TYPES", "POINT_DATA", "CELL_DATA")}
