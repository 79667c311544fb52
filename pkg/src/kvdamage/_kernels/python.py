"""Vectorized numpy element kernels (fallback backend).

All kernels return per-element arrays; scattering into global vectors and
sparse matrices happens in `kvdamage.assembly`.  Strains are constant per
P1 element; the damage field enters through its values at the quadrature
points, where the caller has already evaluated the constitutive laws.

Shapes (k_n nodes per element, k_u displacement dofs, n_s Mandel
components, n_q quadrature points):

    bmat  (n_e, n_s, k_u)    Mandel strain matrix
    btcb  (n_e, k_u, k_u)    precomputed B^T C B blocks
    gmat  (n_e, d, k_n)      scalar gradient matrix
    vols  (n_e,)
    qw    (n_q,)             weights, sum 1 (volume factored out)
    qN    (n_q, k_n)         P1 shape values at the quadrature points
"""

import numpy as np


def elastic_terms(bmat, btcb, vols, qw, qN, cmat, u_e, g_q, gp_q, gpp_q,
                  want_value, want_grad, want_hess):
    """Degraded elastic energy 1/2 gamma(alpha) C e(u):e(u) and derivatives.

    g_q, gp_q, gpp_q are gamma and its derivatives at the quadrature points,
    shape (n_e, n_q).  Returns (energy, grad_u, grad_a, kuu, kua, kaa) with
    None in unwanted slots; gradients and Hessian blocks are per element.
    """
    e = np.einsum("esk,ek->es", bmat, u_e)
    s = e @ cmat.T
    q = np.einsum("es,es->e", e, s)
    gbar = g_q @ qw
    wv = vols * gbar

    energy = 0.5 * float(np.dot(wv, q)) if want_value else None
    grad_u = grad_a = kuu = kua = kaa = None

    if want_grad or want_hess:
        dbar = np.einsum("q,eq,qi->ei", qw, gp_q, qN, optimize=True)
    if want_grad:
        grad_u = wv[:, None] * np.einsum("esk,es->ek", bmat, s)
        grad_a = 0.5 * (vols * q)[:, None] * dbar
    if want_hess:
        bts = np.einsum("esk,es->ek", bmat, s)
        kuu = btcb * wv[:, None, None]
        kua = vols[:, None, None] * bts[:, :, None] * dbar[:, None, :]
        ddbar = np.einsum("q,eq,qi,qj->eij", qw, gpp_q, qN, qN, optimize=True)
        kaa = 0.5 * (vols * q)[:, None, None] * ddbar
    return energy, grad_u, grad_a, kuu, kua, kaa


def plap_terms(gmat, vols, a_e, kappa, p, eps_g, guard,
               want_value, want_grad, want_hess):
    """Damage gradient energy and derivatives.

    Pure form kappa/p |g|^p (eps_g = 0) or the regularized
    kappa (1/2 |g|^2 + eps_g/p |g|^p); |g|^(p-2) is evaluated as
    (|g|^2 + guard^2)^((p-2)/2).  Returns (energy, resid_a, jac_aa).
    """
    g = np.einsum("edk,ek->ed", gmat, a_e)
    m2 = np.einsum("ed,ed->e", g, g)

    if p == 2.0:
        pw = np.ones_like(m2)
        e_p = 0.5 * m2
        curv = np.zeros_like(m2)
    else:
        t = m2 + guard * guard
        pw = t ** ((p - 2.0) / 2.0)
        e_p = (t ** (p / 2.0) - guard**p) / p
        curv = (p - 2.0) * t ** ((p - 4.0) / 2.0)

    if eps_g == 0.0:
        dens = kappa * e_p
        wfac = kappa * pw
        cfac = kappa * curv
    else:
        dens = kappa * (0.5 * m2 + eps_g * e_p)
        wfac = kappa * (1.0 + eps_g * pw)
        cfac = kappa * eps_g * curv

    energy = float(np.dot(vols, dens)) if want_value else None
    resid = jac = None
    if want_grad or want_hess:
        gg = np.einsum("edk,ed->ek", gmat, g)
    if want_grad:
        resid = (vols * wfac)[:, None] * gg
    if want_hess:
        gtg = np.einsum("edk,edl->ekl", gmat, gmat)
        jac = vols[:, None, None] * (
            wfac[:, None, None] * gtg
            + cfac[:, None, None] * gg[:, :, None] * gg[:, None, :]
        )
    return energy, resid, jac


def scalar_field_terms(vols, qw, qN, f_q, fp_q, fpp_q,
                       want_value, want_grad, want_hess):
    """Integral of a pointwise function of alpha and its nodal derivatives.

    f_q, fp_q, fpp_q are the integrand and its alpha derivatives at the
    quadrature points (n_e, n_q); unwanted ones may be None.  Returns
    (integral, grad_a, hess_aa).
    """
    value = float(np.dot(vols, f_q @ qw)) if want_value else None
    grad = hess = None
    if want_grad:
        grad = np.einsum("q,eq,qi,e->ei", qw, fp_q, qN, vols, optimize=True)
    if want_hess:
        hess = np.einsum("q,eq,qi,qj,e->eij", qw, fpp_q, qN, qN, vols,
                         optimize=True)
    return value, grad, hess
