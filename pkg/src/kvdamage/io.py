"""Result export: the CSV energy ledger and legacy VTK field dumps.

Numbers are written with 17 significant digits so round trips through
text recover the doubles essentially exactly.  The VTK reader exists
for round-trip testing and postprocessing convenience, not as a general
VTK implementation: it reads exactly the subset the writer emits.
"""

from __future__ import annotations

import numpy as np

from .errors import FileFormatError
from .mesh import Mesh


_CSV_COLUMNS = (
    "k", "t", "kinetic", "elastic", "phi", "gradient",
    "visc_diss", "dam_diss", "ext_work", "ineq_margin",
    "newton_iters", "pg_norm",
)

_VTK_CELL_TYPES = {1: 3, 2: 5}  # segment -> VTK_LINE, triangle -> VTK_TRIANGLE


def _fmt(x):
    return f"{float(x):.17g}"


def export_csv(traj, report, stats, path):
    """Write the per-step energy ledger with solver statistics.

    One row per stored state; the initial row carries zero iteration
    counts.  Columns: k, t, kinetic, elastic, phi, gradient, visc_diss,
    dam_diss, ext_work, ineq_margin, newton_iters, pg_norm.
    """
    margins = report.ineq_margin
    if margins is None:
        margins = np.zeros(len(report.kinetic))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(_CSV_COLUMNS) + "\n")
        for k, st in enumerate(traj.states):
            stat = stats[k - 1] if k >= 1 and k - 1 < len(stats) else None
            row = [
                str(k), _fmt(st.t),
                _fmt(report.kinetic[k]), _fmt(report.elastic[k]),
                _fmt(report.phi[k]), _fmt(report.gradient[k]),
                _fmt(report.visc_diss[k]), _fmt(report.dam_diss[k]),
                _fmt(report.ext_work[k]), _fmt(margins[k]),
                str(stat.iterations if stat else 0),
                _fmt(stat.pg_norm if stat else 0.0),
            ]
            fh.write(",".join(row) + "\n")


def read_csv(path):
    """Read a ledger written by export_csv into a dict of arrays."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != _CSV_COLUMNS:
            raise FileFormatError(f"unexpected CSV header {header}")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    try:
        data = np.array(rows, dtype=float)
    except ValueError as exc:
        raise FileFormatError(f"malformed CSV body: {exc}") from exc
    if data.ndim != 2 or data.shape[1] != len(_CSV_COLUMNS):
        raise FileFormatError("malformed CSV body")
    return {name: data[:, i] for i, name in enumerate(_CSV_COLUMNS)}


# ---------------------------------------------------------------------------
# VTK legacy ASCII
# ---------------------------------------------------------------------------


def _pad3(arr2d):
    out = np.zeros((arr2d.shape[0], 3))
    out[:, : arr2d.shape[1]] = arr2d
    return out


def export_vtk(state, mesh: Mesh, path):
    """Write one state as a legacy ASCII VTK unstructured grid.

    Point data: vectors u and v (zero padded to three components) and
    the scalar alpha.
    """
    dim = mesh.dim
    n = mesh.n_nodes
    points = _pad3(mesh.nodes)
    u = _pad3(state.u.reshape(n, dim))
    v = _pad3(state.v.reshape(n, dim))
    cells = mesh.elements
    k_n = cells.shape[1]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"kvdamage state k={state.k} t={state.t!r}\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {n} double\n")
        for row in points:
            fh.write(" ".join(_fmt(x) for x in row) + "\n")
        fh.write(f"CELLS {len(cells)} {len(cells) * (k_n + 1)}\n")
        for row in cells:
            fh.write(f"{k_n} " + " ".join(str(int(i)) for i in row) + "\n")
        fh.write(f"CELL_TYPES {len(cells)}\n")
        vtk_type = _VTK_CELL_TYPES[dim]
        for _ in range(len(cells)):
            fh.write(f"{vtk_type}\n")
        fh.write(f"POINT_DATA {n}\n")
        for name, field in (("u", u), ("v", v)):
            fh.write(f"VECTORS {name} double\n")
            for row in field:
                fh.write(" ".join(_fmt(x) for x in row) + "\n")
        fh.write("SCALARS alpha double 1\nLOOKUP_TABLE default\n")
        for a in state.alpha:
            fh.write(_fmt(a) + "\n")


def read_vtk(path):
    """Read a file written by export_vtk.

    Returns (points, cells, point_data) where point_data maps "u" and
    "v" to (n, 3) arrays and "alpha" to an (n,) array.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(lines):
            raise FileFormatError("unexpected end of VTK file")
        line = lines[pos]
        pos += 1
        return line

    if not take().startswith("# vtk DataFile"):
        raise FileFormatError("missing VTK header")
    take()  # title
    if take().strip() != "ASCII":
        raise FileFormatError("only ASCII VTK is supported")
    if take().strip() != "DATASET UNSTRUCTURED_GRID":
        raise FileFormatError("only unstructured grids are supported")

    head = take().split()
    if len(head) != 3 or head[0] != "POINTS":
        raise FileFormatError("expected POINTS block")
    n = int(head[1])
    points = np.array(
        [[float(x) for x in take().split()] for _ in range(n)]
    )
    head = take().split()
    if head[0] != "CELLS":
        raise FileFormatError("expected CELLS block")
    n_cells = int(head[1])
    cells = []
    for _ in range(n_cells):
        row = [int(x) for x in take().split()]
        if len(row) != row[0] + 1:
            raise FileFormatError("malformed cell row")
        cells.append(row[1:])
    cells = np.array(cells, dtype=np.int64)
    head = take().split()
    if head[0] != "CELL_TYPES":
        raise FileFormatError("expected CELL_TYPES block")
    for _ in range(n_cells):
        take()
    head = take().split()
    if head[0] != "POINT_DATA" or int(head[1]) != n:
        raise FileFormatError("expected POINT_DATA block")

    data = {}
    while pos < len(lines):
        line = take().strip()
        if not line:
            continue
        head = line.split()
        if head[0] == "VECTORS":
            data[head[1]] = np.array(
                [[float(x) for x in take().split()] for _ in range(n)]
            )
        elif head[0] == "SCALARS":
            if not take().startswith("LOOKUP_TABLE"):
                raise FileFormatError("SCALARS needs a LOOKUP_TABLE line")
            data[head[1]] = np.array([float(take()) for _ in range(n)])
        else:
            raise FileFormatError(f"unexpected VTK block {head[0]!r}")
    return points, cells, data
