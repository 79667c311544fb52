"""Simplicial P1 meshes, degrees of freedom and the mesh file format.

Supported meshes are segments on an interval (dim 1) and triangles on a
rectangle (dim 2), either built structured or loaded from a plain text
file:

    dim n_nodes n_elems
    <n_nodes coordinate lines, dim floats each>
    <n_elems connectivity lines, dim+1 one-based node ids each>
    <zero or more boundary facet lines: tag followed by its node ids>

Elements are reoriented to positive volume on construction; degenerate
elements are rejected.
"""

from __future__ import annotations

import numpy as np

from .errors import BadSpecError, FileFormatError, InconsistentConstraintError


class Mesh:
    """Nodes, positively oriented simplices and tagged boundary facets.

    Parameters
    ----------
    dim : int
        1 (segments) or 2 (triangles).
    nodes : ndarray (n_nodes, dim)
    elements : ndarray (n_elems, dim + 1)
        Zero based connectivity.
    boundary : dict[str, ndarray]
        Facet node ids per tag, shape (n_facets, dim).
    """

    def __init__(self, dim, nodes, elements, boundary=None):
        if dim not in (1, 2):
            raise BadSpecError("mesh dim must be 1 or 2")
        self.dim = int(dim)
        self.nodes = np.ascontiguousarray(nodes, dtype=float).reshape(-1, self.dim)
        self.elements = np.ascontiguousarray(elements, dtype=np.int64)
        if self.elements.ndim != 2 or self.elements.shape[1] != self.dim + 1:
            raise BadSpecError("elements must have dim + 1 nodes each")
        if self.elements.size and (
            self.elements.min() < 0 or self.elements.max() >= len(self.nodes)
        ):
            raise BadSpecError("element connectivity references missing nodes")
        self.boundary = {
            tag: np.ascontiguousarray(f, dtype=np.int64).reshape(-1, self.dim)
            for tag, f in (boundary or {}).items()
        }
        self._orient()

    def _orient(self):
        vol = self.signed_volumes()
        flip = vol < 0.0
        if np.any(flip):
            els = self.elements.copy()
            els[flip, -2], els[flip, -1] = (
                self.elements[flip, -1],
                self.elements[flip, -2],
            )
            self.elements = els
            vol = np.abs(vol)
        if self.elements.size and np.any(vol <= 0.0):
            bad = int(np.argmin(vol))
            raise BadSpecError(f"element {bad} is degenerate (volume {vol[bad]:g})")

    def signed_volumes(self):
        x = self.nodes[self.elements]
        if self.dim == 1:
            return x[:, 1, 0] - x[:, 0, 0]
        e1 = x[:, 1] - x[:, 0]
        e2 = x[:, 2] - x[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.elements)

    def boundary_nodes(self, tag):
        if tag not in self.boundary:
            raise BadSpecError(f"mesh has no boundary tag {tag!r}; "
                               f"known: {sorted(self.boundary)}")
        return np.unique(self.boundary[tag])


def build_interval_mesh(length: float, n_elements: int) -> Mesh:
    """Uniform segment mesh on [0, length], tags 'left' and 'right'."""
    if length <= 0 or n_elements < 1:
        raise BadSpecError("interval mesh needs length > 0 and n_elements >= 1")
    x = np.linspace(0.0, length, n_elements + 1)[:, None]
    els = np.column_stack([np.arange(n_elements), np.arange(1, n_elements + 1)])
    boundary = {"left": np.array([[0]]), "right": np.array([[n_elements]])}
    return Mesh(1, x, els, boundary)


def build_rectangle_mesh(lx: float, ly: float, nx: int, ny: int) -> Mesh:
    """Structured triangulation of [0,lx] x [0,ly], two triangles per cell.

    Tags 'left', 'right', 'bottom', 'top' on the edge facets.
    """
    if lx <= 0 or ly <= 0 or nx < 1 or ny < 1:
        raise BadSpecError("rectangle mesh needs positive extents and divisions")
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return j * (nx + 1) + i

    els = []
    for j in range(ny):
        for i in range(nx):
            n00, n10 = nid(i, j), nid(i + 1, j)
            n11, n01 = nid(i + 1, j + 1), nid(i, j + 1)
            els.append((n00, n10, n11))
            els.append((n00, n11, n01))
    boundary = {
        "bottom": np.array([[nid(i, 0), nid(i + 1, 0)] for i in range(nx)]),
        "top": np.array([[nid(i, ny), nid(i + 1, ny)] for i in range(nx)]),
        "left": np.array([[nid(0, j), nid(0, j + 1)] for j in range(ny)]),
        "right": np.array([[nid(nx, j), nid(nx, j + 1)] for j in range(ny)]),
    }
    return Mesh(2, nodes, np.array(els), boundary)


def read_mesh(path) -> Mesh:
    """Load a mesh from the plain text format described in the module docs."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise FileFormatError(f"{path}: empty mesh file")
    head = lines[0].split()
    if len(head) != 3:
        raise FileFormatError(f"{path}: header must be 'dim n_nodes n_elems'")
    try:
        dim, n_nodes, n_elems = (int(tok) for tok in head)
    except ValueError as exc:
        raise FileFormatError(f"{path}: non-integer header: {exc}") from None
    need = 1 + n_nodes + n_elems
    if len(lines) < need:
        raise FileFormatError(f"{path}: file ends early ({len(lines)} of {need} lines)")
    try:
        nodes = np.array(
            [[float(tok) for tok in lines[1 + i].split()] for i in range(n_nodes)]
        )
    except ValueError as exc:
        raise FileFormatError(f"{path}: bad node coordinates: {exc}") from None
    if nodes.shape != (n_nodes, dim):
        raise FileFormatError(f"{path}: expected {dim} coordinates per node")
    try:
        els = (
            np.array(
                [
                    [int(tok) for tok in lines[1 + n_nodes + i].split()]
                    for i in range(n_elems)
                ],
                dtype=np.int64,
            )
            - 1
        )
    except ValueError as exc:
        raise FileFormatError(f"{path}: bad connectivity: {exc}") from None
    boundary = {}
    for ln in lines[need:]:
        toks = ln.split()
        if len(toks) < 2:
            raise FileFormatError(f"{path}: facet line needs a tag and node ids: {ln!r}")
        tag = toks[0]
        try:
            facet = [int(tok) - 1 for tok in toks[1:]]
        except ValueError:
            raise FileFormatError(f"{path}: bad facet node id in {ln!r}") from None
        if len(facet) != dim:
            raise FileFormatError(
                f"{path}: facet {ln!r} must have {dim} node(s) in dim {dim}"
            )
        boundary.setdefault(tag, []).append(facet)
    boundary = {tag: np.array(rows, dtype=np.int64) for tag, rows in boundary.items()}
    try:
        return Mesh(dim, nodes, els, boundary)
    except BadSpecError as exc:
        raise FileFormatError(f"{path}: {exc}") from None


def write_mesh(mesh: Mesh, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{mesh.dim} {mesh.n_nodes} {mesh.n_elements}\n")
        for x in mesh.nodes:
            fh.write(" ".join(f"{v:.17g}" for v in x) + "\n")
        for el in mesh.elements:
            fh.write(" ".join(str(v + 1) for v in el) + "\n")
        for tag in sorted(mesh.boundary):
            for facet in mesh.boundary[tag]:
                fh.write(tag + " " + " ".join(str(v + 1) for v in facet) + "\n")


class DofMap:
    """Numbering of displacement and damage unknowns plus Dirichlet data.

    Displacements are interleaved: node n holds dofs n*dim .. n*dim+dim-1.
    The damage field reuses the node numbering directly.  Dirichlet
    constraints apply to displacement components; each is a (dof, program)
    pair with program a callable of time.
    """

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.dim = mesh.dim
        self.n_u = mesh.n_nodes * mesh.dim
        self.n_a = mesh.n_nodes
        self._constraints: list[tuple[int, object]] = []

    def u_dof(self, node, component=0):
        return node * self.dim + component

    def constrain(self, tag: str, component: int, value) -> None:
        """Pin one displacement component on a tagged boundary part.

        `value` is a constant or a callable of time.
        """
        if not 0 <= component < self.dim:
            raise BadSpecError(f"component {component} out of range for dim {self.dim}")
        prog = value if callable(value) else (lambda t, v=float(value): v)
        for node in self.mesh.boundary_nodes(tag):
            self._constraints.append((self.u_dof(int(node), component), prog))

    def constrain_dof(self, dof: int, value) -> None:
        prog = value if callable(value) else (lambda t, v=float(value): v)
        self._constraints.append((int(dof), prog))

    @property
    def n_constraints(self):
        return len(self._constraints)

    def constrained_dofs(self):
        return np.unique([dof for dof, _ in self._constraints]).astype(np.int64)

    def dirichlet_values(self, t: float):
        """Constrained dofs and their values at time t.

        Raises InconsistentConstraintError when one dof is pinned twice
        with different values.
        """
        values: dict[int, float] = {}
        for dof, prog in self._constraints:
            v = float(prog(t))
            if dof in values:
                tol = 1e-12 * max(1.0, abs(v), abs(values[dof]))
                if abs(values[dof] - v) > tol:
                    raise InconsistentConstraintError(
                        f"dof {dof} constrained to both {values[dof]:g} and {v:g} "
                        f"at t = {t:g}"
                    )
            else:
                values[dof] = v
        dofs = np.array(sorted(values), dtype=np.int64)
        return dofs, np.array([values[d] for d in dofs])

    def free_u_mask(self):
        mask = np.ones(self.n_u, dtype=bool)
        mask[self.constrained_dofs()] = False
        return mask
