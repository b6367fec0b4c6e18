"""Legacy ASCII VTK output of nodal fields."""
from __future__ import annotations

from pathlib import Path

import numpy as np

# VTK_LINE, VTK_TRIANGLE, VTK_QUAD
CELL_TYPES = {"Line2": 3, "Tri3": 5, "Quad4": 9}


def format_vtk(mesh, values, name: str = "concentration", title: str = "dmpfem") -> str:
    """Unstructured-grid VTK text with one point scalar.

    Coordinates are padded with zeros to 3D. Floats are written with ``repr``
    so a file round-trips exactly and identical inputs give identical bytes.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.n_nodes,):
        raise ValueError(f"expected {mesh.n_nodes} nodal values, got shape {values.shape}")
    pts = np.zeros((mesh.n_nodes, 3))
    pts[:, : mesh.ndim] = mesh.nodes
    k = mesh.elements.shape[1]
    lines = [
        "# vtk DataFile Version 3.0",
        title.replace("\n", " ")[:255],
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_nodes} double",
    ]
    lines += [" ".join(repr(float(c)) for c in p) for p in pts]
    lines.append(f"CELLS {mesh.n_elements} {mesh.n_elements * (k + 1)}")
    lines += [f"{k} " + " ".join(str(int(i)) for i in e) for e in mesh.elements]
    lines.append(f"CELL_TYPES {mesh.n_elements}")
    lines += [str(CELL_TYPES[mesh.kind])] * mesh.n_elements
    lines += [f"POINT_DATA {mesh.n_nodes}", f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
    lines += [repr(float(v)) for v in values]
    return "\n".join(lines) + "\n"


def write_vtk(path, mesh, values, name: str = "concentration", title: str = "dmpfem") -> Path:
    path = Path(path)
    path.write_text(format_vtk(mesh, values, name, title))
    return path


def read_vtk_scalars(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read back ``(points, cells, values)`` from a file written by :func:`write_vtk`."""
    tokens = Path(path).read_text().split("\n")
    i = tokens.index("DATASET UNSTRUCTURED_GRID") + 1
    n = int(tokens[i].split()[1])
    pts = np.array([[float(t) for t in tokens[i + 1 + j].split()] for j in range(n)])
    i += 1 + n
    ne = int(tokens[i].split()[1])
    cells = np.array([[int(t) for t in tokens[i + 1 + j].split()[1:]] for j in range(ne)])
    i = tokens.index("LOOKUP_TABLE default") + 1
    vals = np.array([float(t) for t in tokens[i:i + n]])
    return pts, cells, vals
