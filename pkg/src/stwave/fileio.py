"""Plain-text mesh files and legacy VTK export."""
from __future__ import annotations

import numpy as np

from .mesh import Mesh


def write_mesh(path, mesh: Mesh):
    with open(path, "w") as fh:
        fh.write(f"nodes {mesh.num_nodes} elements {mesh.num_elements}\n")
        for x, t in mesh.nodes:
            fh.write(f"{x:.17g} {t:.17g}\n")
        for i, j, k in mesh.elements:
            fh.write(f"{i} {j} {k}\n")


def read_mesh(path, level: int = 0) -> Mesh:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "nodes" or header[2] != "elements":
            raise ValueError(f"bad mesh header: {' '.join(header)!r}")
        n, m = int(header[1]), int(header[3])
        data = fh.read().split()
    if len(data) != 2 * n + 3 * m:
        raise ValueError(f"mesh file holds {len(data)} numbers, expected {2 * n + 3 * m}")
    nodes = np.array(data[: 2 * n], dtype=float).reshape(n, 2)
    elements = np.array(data[2 * n:], dtype=np.int64).reshape(m, 3)
    return Mesh(nodes, elements, np.arange(m), level=level)


def write_vtk(path, mesh: Mesh, point_data: dict | None = None, cell_data: dict | None = None,
              title: str = "space-time mesh"):
    """ASCII legacy VTK unstructured grid; (x, t) are written as (x, y, 0)."""
    point_data = point_data or {}
    cell_data = cell_data or {}
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh.num_nodes} double\n")
        for x, t in mesh.nodes:
            fh.write(f"{x:.17g} {t:.17g} 0\n")
        fh.write(f"CELLS {mesh.num_elements} {4 * mesh.num_elements}\n")
        for i, j, k in mesh.elements:
            fh.write(f"3 {i} {j} {k}\n")
        fh.write(f"CELL_TYPES {mesh.num_elements}\n")
        fh.write("5\n" * mesh.num_elements)
        _write_fields(fh, "POINT_DATA", mesh.num_nodes, point_data)
        _write_fields(fh, "CELL_DATA", mesh.num_elements, cell_data)


def _write_fields(fh, section, n, fields):
    if not fields:
        return
    fh.write(f"{section} {n}\n")
    for name, vals in fields.items():
        vals = np.asarray(vals, dtype=float)
        if vals.shape != (n,):
            raise ValueError(f"field {name!r} has shape {vals.shape}, expected ({n},)")
        fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
        fh.write("\n".join(f"{v:.17g}" for v in vals))
        fh.write("\n")


def read_vtk_counts(path) -> dict:
    """Point/cell counts and field names of a legacy VTK file (for checks)."""
    info = {"fields": []}
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "POINTS":
                info["points"] = int(parts[1])
            elif parts[0] == "CELLS":
                info["cells"] = int(parts[1])
            elif parts[0] == "SCALARS":
                info["fields"].append(parts[1])
    return info
