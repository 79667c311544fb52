"""Per-step incremental problem: value, gradient, Hessian, feasible box.

One implicit time step of the damped damage dynamics is the
box-constrained minimization of

    Pi(u, a) = integral rho |(u - u0)/tau - v0|^2
             + 1/2 gamma(a) C1 e(u):e(u) - phi(a) + kappa/p |grad a|^p
             + 1/(2 tau) D(a0) e(u - u0):e(u - u0)
             + eta/(2 tau) |a - a0|^2
             - f_k . u

over 0 <= a <= a0 nodally, where (u0, v0, a0) is the previous state, f_k
the time-averaged load (body plus traction) and D(a0) the viscosity tensor
frozen at the previous damage.  The inertia term carries plain weight rho:
with the velocity update v = 2(u - u0)/tau - v0, stationarity of Pi is
then identical to the assembled midpoint momentum balance, which
weak_momentum_residual checks from independently combined matrices.

This module is the single source of truth for the step functional; the
Newton solver and the energy ledger both consume it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .assembly import (
    ElementGeometry,
    LoadSpec,
    assemble_degraded_stiffness,
    assemble_mass,
    assemble_scalar_mass,
    assemble_stiffness,
    scatter_matrix,
    scatter_vector,
    time_averaged_loads,
)
from .errors import BadSpecError, InfeasibleError
from .materials import GRADIENT_GUARD, MaterialParams

FEASIBILITY_TOL = 1.0e-12

TERM_NAMES = ("inertia", "elastic", "damage", "gradient", "load", "viscous", "zeta")


# ---------------------------------------------------------------------------
# state
# ---------------------------------------------------------------------------


@dataclass
class State:
    """Nodal fields at one time level."""

    k: int
    t: float
    u: np.ndarray
    v: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.alpha = np.asarray(self.alpha, dtype=float)
        for name in ("u", "v", "alpha"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise BadSpecError(f"state field {name} has non-finite entries")
        if self.alpha.size and (self.alpha.min() < 0.0 or self.alpha.max() > 1.0):
            raise BadSpecError(
                f"alpha out of [0, 1]: range "
                f"[{self.alpha.min()}, {self.alpha.max()}]"
            )


@dataclass
class PotentialEval:
    """Value, per-term breakdown and requested derivatives of the potential.

    The gradient and Hessian are in the full (u, alpha) coordinates of
    length n_u + n_a; use StepProblem.reduce_vector / reduce_matrix for the
    free coordinates.  The terms dict sums to value exactly.
    """

    value: float
    terms: dict
    gradient: np.ndarray = None
    hessian: sp.spmatrix = None


# ---------------------------------------------------------------------------
# step problem
# ---------------------------------------------------------------------------


@dataclass
class StepProblem:
    """Immutable data of one incremental minimization.

    Built once per time step; evaluations are pure so concurrent calls
    during line search are safe.
    """

    geom: ElementGeometry
    material: MaterialParams
    prev: State
    tau: float
    t: float
    f_avg: np.ndarray            # time-averaged loads, length n_u
    mass: sp.spmatrix            # rho-weighted vector mass, None if rho = 0
    mass_scalar: sp.spmatrix     # scalar (damage-space) mass
    d_prev: sp.spmatrix          # viscosity matrix at alpha_prev, None if absent
    diri_dofs: np.ndarray        # constrained u dofs at time t
    diri_vals: np.ndarray
    box_lower: np.ndarray
    box_upper: np.ndarray
    dq_phi: bool = False
    _red: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.tau <= 0.0:
            raise BadSpecError(f"tau must be positive, got {self.tau}")
        if np.any(self.box_lower > self.box_upper + FEASIBILITY_TOL):
            raise BadSpecError("damage box has lower > upper")

    # -- coordinate bookkeeping ------------------------------------------

    @property
    def n_u(self):
        return self.geom.n_u

    @property
    def n_a(self):
        return self.geom.n_a

    @property
    def free_u(self):
        mask = np.ones(self.n_u, dtype=bool)
        mask[self.diri_dofs] = False
        return np.flatnonzero(mask)

    @property
    def reduced_indices(self):
        """Indices of free u dofs then all alpha dofs, into the full vector."""
        if self._red is None:
            object.__setattr__(
                self, "_red", np.concatenate([self.free_u, self.n_u + np.arange(self.n_a)])
            )
        return self._red

    def reduce_vector(self, g):
        return g[self.reduced_indices]

    def reduce_matrix(self, h):
        idx = self.reduced_indices
        return sp.csr_matrix(h)[idx][:, idx]

    def join(self, u, alpha):
        """Pack (u, alpha) into the reduced coordinate vector."""
        return np.concatenate([u[self.free_u], alpha])

    def split(self, x):
        """Unpack reduced coordinates into full (u, alpha)."""
        n_f = len(self.free_u)
        u = np.empty(self.n_u)
        u[self.free_u] = x[:n_f]
        u[self.diri_dofs] = self.diri_vals
        return u, x[n_f:]

    def start_point(self):
        """Feasible warm start: free flight in u, previous damage."""
        u = self.prev.u + self.tau * self.prev.v
        u[self.diri_dofs] = self.diri_vals
        return u, self.prev.alpha.copy()

    # -- evaluation --------------------------------------------------------

    def check_feasible(self, alpha):
        lo = np.max(self.box_lower - alpha) if alpha.size else 0.0
        hi = np.max(alpha - self.box_upper) if alpha.size else 0.0
        viol = max(lo, hi)
        if viol > FEASIBILITY_TOL:
            raise InfeasibleError(
                f"alpha violates its box by {viol:.3e} (tol {FEASIBILITY_TOL})"
            )

    def _phi_quadrature(self, a_q, want_hess):
        """-phi and derivative factors at the quadrature points."""
        de = self.material.damage_energy
        f_q = -de.value(a_q)
        if self.dq_phi:
            a0_q = self.geom.alpha_at_quad(self.prev.alpha)
            da = a_q - a0_q
            quot = de.deriv(a_q)
            big = np.abs(da) > 1.0e-12
            quot = np.where(big, (de.value(a_q) - de.value(a0_q)) / np.where(big, da, 1.0), quot)
            fp_q = -quot
        else:
            fp_q = -de.deriv(a_q)
        fpp_q = -de.second_deriv(a_q) if want_hess else None
        return f_q, fp_q, fpp_q

    def evaluate(self, u, alpha, want_grad=True, want_hess=False,
                 check_box=True) -> PotentialEval:
        """Potential value with per-term breakdown, optionally derivatives."""
        geom, mat, tau = self.geom, self.material, self.tau
        u = np.asarray(u, dtype=float)
        alpha = np.asarray(alpha, dtype=float)
        if check_box:
            self.check_feasible(alpha)

        law = mat.degradation
        cmat = mat.elastic.matrix
        a_q = geom.alpha_at_quad(alpha)
        g_q = law.value(a_q)
        need_d1 = want_grad or want_hess
        gp_q = law.deriv(a_q) if need_d1 else None
        gpp_q = law.second_deriv(a_q) if want_hess else None

        e_val, e_gu, e_ga, kuu, kua, kaa = _kernels.elastic_terms(
            geom.bmat, geom.btcb(cmat), geom.vols, geom.quad_w, geom.quad_n,
            cmat, u[geom.u_dofs], g_q, gp_q, gpp_q,
            True, want_grad, want_hess,
        )

        f_q, fp_q, fpp_q = self._phi_quadrature(a_q, want_hess)
        d_val, d_ga, d_haa = _kernels.scalar_field_terms(
            geom.vols, geom.quad_w, geom.quad_n, f_q,
            fp_q if need_d1 else None, fpp_q,
            True, want_grad, want_hess,
        )

        gt = mat.gradient
        p_val, p_res, p_jac = _kernels.plap_terms(
            geom.gmat, geom.vols, alpha[geom.conn], gt.kappa, gt.p, gt.eps_g,
            GRADIENT_GUARD, True, want_grad, want_hess,
        )

        du = u - self.prev.u
        da = alpha - self.prev.alpha
        eta = mat.dissipation.eta

        terms = {}
        if self.mass is not None:
            w = du / tau - self.prev.v
            mw = self.mass @ w
            terms["inertia"] = float(w @ mw)
        else:
            mw = None
            terms["inertia"] = 0.0
        terms["elastic"] = e_val
        terms["damage"] = d_val
        terms["gradient"] = p_val
        terms["load"] = -float(self.f_avg @ u)
        if self.d_prev is not None:
            dv = self.d_prev @ du
            terms["viscous"] = 0.5 / tau * float(du @ dv)
        else:
            dv = None
            terms["viscous"] = 0.0
        if eta > 0.0:
            msda = self.mass_scalar @ da
            terms["zeta"] = 0.5 * eta / tau * float(da @ msda)
        else:
            msda = None
            terms["zeta"] = 0.0

        value = float(sum(terms.values()))
        out = PotentialEval(value=value, terms=terms)

        if want_grad:
            g_u = scatter_vector(geom.u_dofs, e_gu, self.n_u) - self.f_avg
            if mw is not None:
                g_u += (2.0 / tau) * mw
            if dv is not None:
                g_u += dv / tau
            g_a = (
                scatter_vector(geom.conn, e_ga, self.n_a)
                + scatter_vector(geom.conn, d_ga, self.n_a)
                + scatter_vector(geom.conn, p_res, self.n_a)
            )
            if msda is not None:
                g_a += (eta / tau) * msda
            out.gradient = np.concatenate([g_u, g_a])

        if want_hess:
            h_uu = scatter_matrix(geom.u_dofs, geom.u_dofs, kuu,
                                  (self.n_u, self.n_u))
            if self.mass is not None:
                h_uu = h_uu + (2.0 / tau**2) * self.mass
            if self.d_prev is not None:
                h_uu = h_uu + self.d_prev / tau
            h_ua = scatter_matrix(geom.u_dofs, geom.conn, kua,
                                  (self.n_u, self.n_a))
            h_aa = (
                scatter_matrix(geom.conn, geom.conn, kaa, (self.n_a, self.n_a))
                + scatter_matrix(geom.conn, geom.conn, d_haa,
                                 (self.n_a, self.n_a))
                + scatter_matrix(geom.conn, geom.conn, p_jac,
                                 (self.n_a, self.n_a))
            )
            if eta > 0.0:
                h_aa = h_aa + (eta / tau) * self.mass_scalar
            out.hessian = sp.bmat(
                [[h_uu, h_ua], [h_ua.T, h_aa]], format="csr"
            )
        return out


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def viscosity_matrix(geom: ElementGeometry, material: MaterialParams, alpha):
    """Assembled D(alpha) = D0 + chi_r gamma(alpha) C1, or None if absent."""
    visc = material.viscosity
    parts = []
    if visc.D0 is not None:
        parts.append(assemble_stiffness(geom, visc.D0.matrix))
    if visc.chi_r > 0.0:
        parts.append(
            visc.chi_r
            * assemble_degraded_stiffness(
                geom, material.degradation, material.elastic.matrix, alpha
            )
        )
    if not parts:
        return None
    return sum(parts[1:], start=parts[0])


def build_step_problem(
    geom: ElementGeometry,
    material: MaterialParams,
    prev: State,
    tau: float,
    loads: LoadSpec = None,
    dofmap=None,
    mass=None,
    mass_scalar=None,
    d_prev=None,
    f_avg=None,
    dq_phi=None,
    box_lower=None,
) -> StepProblem:
    """Assemble the frozen data of the step ending at prev.t + tau.

    mass, mass_scalar, d_prev and f_avg may be passed in by a driver that
    caches them across steps; anything omitted is assembled here.
    """
    t = prev.t + tau
    if mass is None and material.rho > 0.0:
        mass = assemble_mass(geom, material.rho)
    if material.rho == 0.0:
        mass = None
    if mass_scalar is None:
        mass_scalar = assemble_scalar_mass(geom)
    if d_prev is None:
        d_prev = viscosity_matrix(geom, material, prev.alpha)
    if f_avg is None:
        f_avg = time_averaged_loads(geom, loads or LoadSpec(), prev.t, t)
    if dofmap is not None:
        diri_dofs, diri_vals = dofmap.dirichlet_values(t)
    else:
        diri_dofs = np.empty(0, dtype=int)
        diri_vals = np.empty(0)
    if material.quasistatic and len(diri_dofs) == 0:
        raise BadSpecError(
            "quasistatic problems (rho = 0) need at least one Dirichlet "
            "constraint to fix rigid motions"
        )
    if dq_phi is None:
        dq_phi = not material.damage_energy.concave
    if box_lower is None:
        box_lower = np.zeros(geom.n_a)
    return StepProblem(
        geom=geom,
        material=material,
        prev=prev,
        tau=tau,
        t=t,
        f_avg=np.asarray(f_avg, dtype=float),
        mass=mass,
        mass_scalar=mass_scalar,
        d_prev=d_prev,
        diri_dofs=np.asarray(diri_dofs, dtype=int),
        diri_vals=np.asarray(diri_vals, dtype=float),
        box_lower=np.asarray(box_lower, dtype=float),
        box_upper=prev.alpha.copy(),
        dq_phi=bool(dq_phi),
    )


# ---------------------------------------------------------------------------
# functional interface
# ---------------------------------------------------------------------------


def potential_value(sp_: StepProblem, u, alpha) -> float:
    return sp_.evaluate(u, alpha, want_grad=False).value


def potential_gradient(sp_: StepProblem, u, alpha) -> np.ndarray:
    return sp_.evaluate(u, alpha, want_grad=True).gradient


def potential_hessian(sp_: StepProblem, u, alpha):
    return sp_.evaluate(u, alpha, want_grad=False, want_hess=True).hessian


def feasible_box(sp_: StepProblem):
    return sp_.box_lower.copy(), sp_.box_upper.copy()


# ---------------------------------------------------------------------------
# independent consistency check
# ---------------------------------------------------------------------------


def weak_momentum_residual(sp_: StepProblem, u, alpha, v_new):
    """Assembled momentum balance of the step, combined independently.

    Evaluates M (v - v0)/tau + K(alpha) u + D(a0) e((u - u0)/tau) - f_k as
    a full nodal vector (constrained rows carry the Dirichlet reactions).
    At a minimizer of the potential with v from the velocity update, the
    free rows vanish; this ties the inertia weight of the potential to the
    momentum equation it must reproduce.
    """
    geom, mat = sp_.geom, sp_.material
    r = assemble_degraded_stiffness(
        geom, mat.degradation, mat.elastic.matrix, alpha
    ) @ u - sp_.f_avg
    if sp_.mass is not None:
        r += sp_.mass @ (np.asarray(v_new) - sp_.prev.v) / sp_.tau
    if sp_.d_prev is not None:
        r += sp_.d_prev @ (u - sp_.prev.u) / sp_.tau
    return r
