"""CSV and legacy-VTK writers.

Numbers are written with fixed ``repr``-style formatting so reruns produce
byte-identical files, independent of the locale.
"""

from __future__ import annotations

import os
from typing import Mapping, Sequence

import numpy as np

from .fem import FunctionSpace
from .mesh import Mesh

__all__ = ["write_csv", "write_vtk", "node_values", "cell_values"]

_VTK_CELL_TYPE = {1: 3, 2: 5}  # VTK_LINE, VTK_TRIANGLE


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: str, header: Sequence[str], rows) -> None:
    """Write a header line and one comma separated line per row.

    ``rows`` is any iterable of equal-length sequences; an empty iterable
    yields a header-only file.
    """
    width = len(header)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for k, row in enumerate(rows):
            if len(row) != width:
                raise ValueError(f"row {k} has {len(row)} fields, header has {width}")
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def node_values(space: FunctionSpace, coeffs) -> np.ndarray:
    """Values at mesh vertices of a continuous field, ``(n_nodes, components)``.

    Vertex dofs are numbered first in every continuous space.
    """
    if space.family != "CG":
        raise ValueError("node values need a continuous space")
    k = space.components
    return np.asarray(coeffs, dtype=float).reshape(-1, k)[: space.mesh.n_nodes]


def cell_values(space: FunctionSpace, coeffs) -> np.ndarray:
    """Field values at cell centroids, ``(n_cells, components)``."""
    d = space.mesh.dim
    centroid = np.full((1, d), 1.0 / (d + 1))
    vals, _ = space.tabulate(centroid)
    k = space.components
    c = np.asarray(coeffs, dtype=float)[space.cell_dofs].reshape(space.mesh.n_cells, -1, k)
    return np.einsum("a,cak->ck", vals[0], c)


def _pad3(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    out = np.zeros((a.shape[0], 3))
    out[:, : a.shape[1]] = a
    return out


def write_vtk(
    mesh: Mesh,
    path: str,
    point_vectors: Mapping[str, np.ndarray] | None = None,
    cell_arrays: Mapping[str, np.ndarray] | None = None,
    title: str = "phsvk output",
) -> None:
    """Legacy ASCII unstructured grid with point vectors and cell field arrays."""
    point_vectors = point_vectors or {}
    cell_arrays = cell_arrays or {}
    lines = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {mesh.n_nodes} double")
    lines += [" ".join(_fmt(x) for x in p) for p in _pad3(mesh.nodes)]
    nv = mesh.cells.shape[1]
    lines.append(f"CELLS {mesh.n_cells} {mesh.n_cells * (nv + 1)}")
    lines += [f"{nv} " + " ".join(str(int(i)) for i in c) for c in mesh.cells]
    lines.append(f"CELL_TYPES {mesh.n_cells}")
    lines += [str(_VTK_CELL_TYPE[mesh.dim])] * mesh.n_cells
    if point_vectors:
        lines.append(f"POINT_DATA {mesh.n_nodes}")
        for name, vals in point_vectors.items():
            vals = _pad3(vals)
            if vals.shape[0] != mesh.n_nodes:
                raise ValueError(f"point field {name!r} has {vals.shape[0]} rows, mesh has {mesh.n_nodes} nodes")
            lines.append(f"VECTORS {name} double")
            lines += [" ".join(_fmt(x) for x in v) for v in vals]
    if cell_arrays:
        lines.append(f"CELL_DATA {mesh.n_cells}")
        lines.append(f"FIELD FieldData {len(cell_arrays)}")
        for name, vals in cell_arrays.items():
            vals = np.asarray(vals, dtype=float).reshape(mesh.n_cells, -1)
            lines.append(f"{name} {vals.shape[1]} {mesh.n_cells} double")
            lines += [" ".join(_fmt(x) for x in v) for v in vals]
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
