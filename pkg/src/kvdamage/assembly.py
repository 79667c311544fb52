"""P1 finite element assembly.

Precomputes per-element geometry (volumes, strain and gradient matrices in
Mandel convention, quadrature data) once per mesh and feeds it to the
element kernels; this module then scatters their per-element output into
global vectors and CSR matrices.  The quadrature (2 point Gauss on
segments, 3 midpoints on triangles) integrates the P1 mass bilinear form
exactly and is used consistently everywhere, including energies reported
by the time integrator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import BadSpecError
from .materials import GRADIENT_GUARD, GradientTerm
from .mesh import Mesh

_SQRT2 = np.sqrt(2.0)


# ---------------------------------------------------------------------------
# geometry precomputation
# ---------------------------------------------------------------------------


@dataclass
class FacetQuad:
    """Quadrature data of the boundary facets of one tag."""

    nodes: np.ndarray      # (n_f, k_f)
    u_dofs: np.ndarray     # (n_f, k_f * dim)
    weights: np.ndarray    # (n_f, n_qf), includes the facet measure
    shape: np.ndarray      # (n_qf, k_f)
    points: np.ndarray     # (n_f, n_qf, dim)


@dataclass
class ElementGeometry:
    """Precomputed element data shared by all assembly routines."""

    dim: int
    n_nodes: int
    conn: np.ndarray       # (n_e, k_n)
    u_dofs: np.ndarray     # (n_e, k_u)
    vols: np.ndarray       # (n_e,)
    bmat: np.ndarray       # (n_e, n_s, k_u)
    gmat: np.ndarray       # (n_e, dim, k_n)
    quad_w: np.ndarray     # (n_q,), sums to 1
    quad_n: np.ndarray     # (n_q, k_n)
    quad_x: np.ndarray     # (n_e, n_q, dim)
    facets: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_u(self):
        return self.n_nodes * self.dim

    @property
    def n_a(self):
        return self.n_nodes

    def btcb(self, cmat):
        """B^T C B blocks for a Mandel matrix, cached per matrix identity."""
        key = id(cmat)
        hit = self._cache.get(key)
        if hit is None or hit[0] is not cmat:
            blocks = np.einsum("esk,st,etl->ekl", self.bmat, cmat, self.bmat,
                               optimize=True)
            self._cache[key] = (cmat, blocks)
            return blocks
        return hit[1]

    def alpha_at_quad(self, alpha):
        """Field values at the quadrature points, (n_e, n_q)."""
        return alpha[self.conn] @ self.quad_n.T


def element_geometry(mesh: Mesh) -> ElementGeometry:
    d = mesh.dim
    conn = mesh.elements
    n_e = mesh.n_elements
    k_n = d + 1
    x = mesh.nodes[conn]  # (n_e, k_n, d)

    if d == 1:
        length = x[:, 1, 0] - x[:, 0, 0]
        vols = length
        gmat = np.empty((n_e, 1, 2))
        gmat[:, 0, 0] = -1.0 / length
        gmat[:, 0, 1] = 1.0 / length
        bmat = gmat.copy()
        # 2 point Gauss on the reference segment, exact for cubics
        offset = 0.5 / np.sqrt(3.0)
        xi = np.array([0.5 - offset, 0.5 + offset])
        quad_w = np.array([0.5, 0.5])
        quad_n = np.column_stack([1.0 - xi, xi])
    else:
        e1 = x[:, 1] - x[:, 0]
        e2 = x[:, 2] - x[:, 0]
        vols = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        inv2a = 1.0 / (2.0 * vols)
        xs, ys = x[..., 0], x[..., 1]
        b = np.stack(
            [ys[:, 1] - ys[:, 2], ys[:, 2] - ys[:, 0], ys[:, 0] - ys[:, 1]], axis=1
        ) * inv2a[:, None]
        c = np.stack(
            [xs[:, 2] - xs[:, 1], xs[:, 0] - xs[:, 2], xs[:, 1] - xs[:, 0]], axis=1
        ) * inv2a[:, None]
        gmat = np.stack([b, c], axis=1)  # (n_e, 2, 3)
        bmat = np.zeros((n_e, 3, 6))
        bmat[:, 0, 0::2] = b
        bmat[:, 1, 1::2] = c
        bmat[:, 2, 0::2] = c / _SQRT2
        bmat[:, 2, 1::2] = b / _SQRT2
        # edge midpoint rule, exact for quadratics (so for the P1 mass)
        quad_w = np.full(3, 1.0 / 3.0)
        quad_n = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])

    u_dofs = (conn[:, :, None] * d + np.arange(d)[None, None, :]).reshape(n_e, -1)
    quad_x = np.einsum("qi,eid->eqd", quad_n, x)

    facets = {}
    for tag, fnodes in mesh.boundary.items():
        fx = mesh.nodes[fnodes]  # (n_f, k_f, d)
        if d == 1:
            weights = np.ones((len(fnodes), 1))  # counting measure on endpoints
            shape = np.array([[1.0]])
            points = fx
        else:
            lengths = np.linalg.norm(fx[:, 1] - fx[:, 0], axis=1)
            offset = 0.5 / np.sqrt(3.0)
            xi = np.array([0.5 - offset, 0.5 + offset])
            shape = np.column_stack([1.0 - xi, xi])
            weights = 0.5 * lengths[:, None] * np.ones((1, 2))
            points = np.einsum("qi,fid->fqd", shape, fx)
        fu = (fnodes[:, :, None] * d + np.arange(d)[None, None, :]).reshape(
            len(fnodes), -1
        )
        facets[tag] = FacetQuad(fnodes, fu, weights, shape, points)

    return ElementGeometry(
        dim=d,
        n_nodes=mesh.n_nodes,
        conn=conn,
        u_dofs=u_dofs,
        vols=vols,
        bmat=bmat,
        gmat=gmat,
        quad_w=quad_w,
        quad_n=quad_n,
        quad_x=quad_x,
        facets=facets,
    )


# ---------------------------------------------------------------------------
# scatter helpers
# ---------------------------------------------------------------------------


def scatter_vector(idx, vals, n):
    return np.bincount(idx.ravel(), weights=vals.ravel(), minlength=n)


def scatter_matrix(row_dofs, col_dofs, blocks, shape):
    n_e, kr = row_dofs.shape
    kc = col_dofs.shape[1]
    rows = np.broadcast_to(row_dofs[:, :, None], (n_e, kr, kc))
    cols = np.broadcast_to(col_dofs[:, None, :], (n_e, kr, kc))
    m = sp.coo_matrix(
        (blocks.ravel(), (rows.ravel(), cols.ravel())), shape=shape
    )
    return m.tocsr()


# ---------------------------------------------------------------------------
# matrices
# ---------------------------------------------------------------------------


def _scalar_mass_blocks(geom: ElementGeometry, coef):
    """Element blocks of integral coef N_i N_j, coef constant or nodal."""
    if np.isscalar(coef):
        c_q = np.full((len(geom.vols), len(geom.quad_w)), float(coef))
    else:
        c_q = np.asarray(coef, dtype=float)[geom.conn] @ geom.quad_n.T
    nn = np.einsum("q,eq,qi,qj->eij", geom.quad_w, c_q, geom.quad_n, geom.quad_n,
                   optimize=True)
    return geom.vols[:, None, None] * nn


def assemble_scalar_mass(geom: ElementGeometry, coef=1.0):
    blocks = _scalar_mass_blocks(geom, coef)
    return scatter_matrix(geom.conn, geom.conn, blocks, (geom.n_a, geom.n_a))


def assemble_mass(geom: ElementGeometry, rho):
    """Consistent mass matrix of the displacement space with density rho."""
    mb = _scalar_mass_blocks(geom, rho)
    d = geom.dim
    k_n = geom.conn.shape[1]
    blocks = np.zeros((len(geom.vols), k_n * d, k_n * d))
    for c in range(d):
        blocks[:, c::d, c::d] = mb
    return scatter_matrix(geom.u_dofs, geom.u_dofs, blocks, (geom.n_u, geom.n_u))


def assemble_stiffness(geom: ElementGeometry, cmat, coef_e=None):
    """Stiffness for a constant Mandel tensor, optionally scaled per element."""
    w = geom.vols if coef_e is None else geom.vols * coef_e
    blocks = geom.btcb(cmat) * w[:, None, None]
    return scatter_matrix(geom.u_dofs, geom.u_dofs, blocks, (geom.n_u, geom.n_u))


def assemble_degraded_stiffness(geom: ElementGeometry, law, cmat, alpha):
    """Stiffness with coefficient gamma(alpha_h) at the quadrature points."""
    g_q = np.asarray(law.value(geom.alpha_at_quad(np.asarray(alpha, dtype=float))))
    return assemble_stiffness(geom, cmat, coef_e=g_q @ geom.quad_w)


def scalar_stiffness(geom: ElementGeometry):
    """P1 Laplacian of the damage space (used for H1 norms and p = 2)."""
    gtg = np.einsum("edk,edl->ekl", geom.gmat, geom.gmat)
    blocks = geom.vols[:, None, None] * gtg
    return scatter_matrix(geom.conn, geom.conn, blocks, (geom.n_a, geom.n_a))


def damage_gradient_terms(geom: ElementGeometry, term: GradientTerm, alpha,
                          want_value=True, want_grad=True, want_hess=False):
    """Energy, nodal residual and Hessian of the damage gradient term."""
    a_e = np.asarray(alpha, dtype=float)[geom.conn]
    energy, resid_e, jac_e = _kernels.plap_terms(
        geom.gmat, geom.vols, a_e, term.kappa, term.p, term.eps_g,
        GRADIENT_GUARD, want_value, want_grad, want_hess,
    )
    resid = (
        scatter_vector(geom.conn, resid_e, geom.n_a) if want_grad else None
    )
    jac = (
        scatter_matrix(geom.conn, geom.conn, jac_e, (geom.n_a, geom.n_a))
        if want_hess
        else None
    )
    return energy, resid, jac


def damage_gradient_residual(geom: ElementGeometry, term: GradientTerm, alpha):
    return damage_gradient_terms(geom, term, alpha, want_value=False)[1]


# ---------------------------------------------------------------------------
# loads
# ---------------------------------------------------------------------------


@dataclass
class LoadSpec:
    """Body force and boundary tractions.

    body : callable (t, points (n, d)) -> (n, d), or None
    tractions : dict tag -> callable with the same signature
    """

    body: object = None
    tractions: dict = field(default_factory=dict)


def assemble_body_load(geom: ElementGeometry, fn, t: float):
    f = np.zeros(geom.n_u)
    if fn is None:
        return f
    n_e, n_q, d = geom.quad_x.shape
    vals = np.asarray(fn(t, geom.quad_x.reshape(-1, d)), dtype=float)
    vals = vals.reshape(n_e, n_q, d)
    # F_i += vol * sum_q w_q f(x_q) N_i(x_q), per component
    fe = np.einsum("q,eqd,qi,e->eid", geom.quad_w, vals, geom.quad_n, geom.vols,
                   optimize=True)
    return scatter_vector(geom.u_dofs, fe.reshape(n_e, -1), geom.n_u)


def assemble_traction(geom: ElementGeometry, tag: str, fn, t: float):
    if tag not in geom.facets:
        raise BadSpecError(f"no boundary tag {tag!r}; known: {sorted(geom.facets)}")
    fq = geom.facets[tag]
    n_f, n_qf, d = fq.points.shape
    vals = np.asarray(fn(t, fq.points.reshape(-1, d)), dtype=float).reshape(
        n_f, n_qf, d
    )
    fe = np.einsum("fq,fqd,qi->fid", fq.weights, vals, fq.shape, optimize=True)
    return scatter_vector(fq.u_dofs, fe.reshape(n_f, -1), geom.n_u)


def assemble_loads(geom: ElementGeometry, loads: LoadSpec, t: float):
    f = assemble_body_load(geom, loads.body, t)
    for tag, fn in loads.tractions.items():
        f = f + assemble_traction(geom, tag, fn, t)
    return f


def time_averaged_loads(geom: ElementGeometry, loads: LoadSpec,
                        t_prev: float, t: float):
    """Mean of the assembled load over [t_prev, t], Simpson with 5 samples."""
    ts = np.linspace(t_prev, t, 5)
    weights = np.array([1.0, 4.0, 2.0, 4.0, 1.0]) / 12.0
    f = np.zeros(geom.n_u)
    for w, ti in zip(weights, ts):
        f = f + w * assemble_loads(geom, loads, ti)
    return f


# ---------------------------------------------------------------------------
# Dirichlet elimination
# ---------------------------------------------------------------------------


def apply_dirichlet(a_mat, rhs, dofs, values):
    """Symmetric elimination of prescribed dofs.

    Returns (reduced matrix, reduced rhs, free dof indices); the reduced
    system keeps the symmetry of the input and its solution together with
    the prescribed values solves the original KKT conditions.
    """
    n = a_mat.shape[0]
    mask = np.ones(n, dtype=bool)
    mask[dofs] = False
    free = np.flatnonzero(mask)
    a_csr = sp.csr_matrix(a_mat)
    a_ff = a_csr[free][:, free]
    b_f = rhs[free] - a_csr[free][:, dofs] @ values
    return a_ff, b_f, free


def expand_dirichlet(x_free, free, dofs, values, n):
    x = np.empty(n)
    x[free] = x_free
    x[dofs] = values
    return x
