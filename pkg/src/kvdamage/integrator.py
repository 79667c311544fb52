"""Time loop, trajectory interpolants and the energy ledger.

The loop solves one box-constrained incremental problem per step and
performs the midpoint velocity update.  The ledger recomputes every
energy and dissipation term from the stored states with the same
quadrature the solver used, accumulates external work incrementally
(including the work of Dirichlet reactions), and audits the one-sided
discrete energy estimate

    kinetic + stored + (1 - sqrt(tau/tau0)) * dissipated  <=
        initial energy + external work

at every grid time.  Dissipation uses the viscosity frozen at the
previous step's damage, matching the scheme; the ledger also reports the
end-of-step variant D(alpha_k) so the O(tau) gap between the two is
visible rather than silently absorbed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .assembly import (
    ElementGeometry,
    LoadSpec,
    assemble_mass,
    assemble_scalar_mass,
    scalar_stiffness,
    time_averaged_loads,
)
from .errors import BadSpecError, NoConvergenceError, NotPositiveDefiniteError
from .materials import GRADIENT_GUARD, MaterialParams, critical_timestep
from .solver import SolverConfig, solve_step, velocity_update
from .step_problem import (
    State,
    build_step_problem,
    viscosity_matrix,
    weak_momentum_residual,
)


# ---------------------------------------------------------------------------
# trajectory
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    """States at the grid times k tau with the standard interpolants.

    kind "affine" is continuous piecewise linear; "upper" and "lower" are
    piecewise constant from the right/left endpoint of each step interval;
    "midpoint" averages the two.  On the grid the affine interpolant
    reproduces the states exactly.
    """

    tau: float
    states: list

    @property
    def n_steps(self):
        return len(self.states) - 1

    @property
    def t_end(self):
        return self.states[-1].t

    def state(self, k) -> State:
        return self.states[k]

    def _locate(self, t):
        """Index k with (k-1) tau < t <= k tau, and the local coordinate."""
        eps = 1e-12 * max(1.0, self.t_end)
        if t < -eps or t > self.t_end + eps:
            raise BadSpecError(
                f"query time {t} outside [0, {self.t_end}]"
            )
        t = min(max(t, 0.0), self.t_end)
        k = int(np.ceil(t / self.tau - 1e-12))
        k = min(max(k, 0), self.n_steps)
        if k == 0:
            return 0, 1.0
        theta = (t - (k - 1) * self.tau) / self.tau
        return k, theta

    def interpolate(self, t, kind="affine"):
        """Fields (u, v, alpha) at time t for the requested interpolant."""
        k, theta = self._locate(t)
        cur = self.states[k]
        if k == 0:
            return cur.u.copy(), cur.v.copy(), cur.alpha.copy()
        old = self.states[k - 1]
        if kind == "affine":
            w_old, w_cur = 1.0 - theta, theta
        elif kind == "upper":
            w_old, w_cur = 0.0, 1.0
        elif kind == "lower":
            w_old, w_cur = 1.0, 0.0
        elif kind == "midpoint":
            w_old = w_cur = 0.5
        else:
            raise BadSpecError(f"unknown interpolant kind {kind!r}")
        return (
            w_old * old.u + w_cur * cur.u,
            w_old * old.v + w_cur * cur.v,
            w_old * old.alpha + w_cur * cur.alpha,
        )


# ---------------------------------------------------------------------------
# energy ledger
# ---------------------------------------------------------------------------


@dataclass
class EnergyReport:
    """Per-step energies (J) and cumulative dissipation/work ledgers.

    phi is the damage-potential part of the stored energy (the integral of
    -phi, nonnegative for the standard laws); visc_diss_alt evaluates the
    viscous increments with the end-of-step damage instead of the scheme's
    frozen one.
    """

    kinetic: np.ndarray
    elastic: np.ndarray
    phi: np.ndarray
    gradient: np.ndarray
    visc_diss: np.ndarray
    dam_diss: np.ndarray
    ext_work: np.ndarray
    visc_diss_alt: np.ndarray
    ineq_margin: np.ndarray = None

    @property
    def stored(self):
        return self.elastic + self.phi + self.gradient

    @property
    def total(self):
        return self.kinetic + self.stored

    def n_steps(self):
        return len(self.kinetic) - 1


def _stored_parts(geom: ElementGeometry, material: MaterialParams, u, alpha):
    law = material.degradation
    cmat = material.elastic.matrix
    a_q = geom.alpha_at_quad(alpha)
    elastic = _kernels.elastic_terms(
        geom.bmat, geom.btcb(cmat), geom.vols, geom.quad_w, geom.quad_n,
        cmat, u[geom.u_dofs], law.value(a_q), None, None,
        True, False, False,
    )[0]
    phi_part = _kernels.scalar_field_terms(
        geom.vols, geom.quad_w, geom.quad_n,
        -material.damage_energy.value(a_q), None, None,
        True, False, False,
    )[0]
    gt = material.gradient
    grad_part = _kernels.plap_terms(
        geom.gmat, geom.vols, alpha[geom.conn], gt.kappa, gt.p, gt.eps_g,
        GRADIENT_GUARD, True, False, False,
    )[0]
    return elastic, phi_part, grad_part


def energy_report(traj: Trajectory, geom: ElementGeometry,
                  material: MaterialParams, loads: LoadSpec = None,
                  dofmap=None) -> EnergyReport:
    """Rebuild the full energy ledger from a trajectory.

    Uses exactly the matrices and load averages of the scheme, so the
    ledger of a freshly computed trajectory reproduces the solver's view
    bit for bit.
    """
    n = traj.n_steps
    mass = assemble_mass(geom, material.rho) if material.rho > 0.0 else None
    mass_scalar = assemble_scalar_mass(geom)
    eta = material.dissipation.eta
    loads = loads or LoadSpec()

    kinetic = np.zeros(n + 1)
    elastic = np.zeros(n + 1)
    phi = np.zeros(n + 1)
    gradient = np.zeros(n + 1)
    visc = np.zeros(n + 1)
    visc_alt = np.zeros(n + 1)
    dam = np.zeros(n + 1)
    work = np.zeros(n + 1)

    for k, st in enumerate(traj.states):
        if mass is not None:
            kinetic[k] = 0.5 * float(st.v @ (mass @ st.v))
        elastic[k], phi[k], gradient[k] = _stored_parts(
            geom, material, st.u, st.alpha
        )

    for k in range(1, n + 1):
        old, cur = traj.states[k - 1], traj.states[k]
        du = cur.u - old.u
        da = cur.alpha - old.alpha
        d_prev = viscosity_matrix(geom, material, old.alpha)
        if d_prev is not None:
            visc[k] = visc[k - 1] + float(du @ (d_prev @ du)) / traj.tau
            d_cur = viscosity_matrix(geom, material, cur.alpha)
            visc_alt[k] = visc_alt[k - 1] + float(du @ (d_cur @ du)) / traj.tau
        if eta > 0.0:
            dam[k] = dam[k - 1] + eta / traj.tau * float(da @ (mass_scalar @ da))

        f_avg = time_averaged_loads(geom, loads, old.t, cur.t)
        inc = float(f_avg @ du)
        if dofmap is not None:
            diri, _ = dofmap.dirichlet_values(cur.t)
            if len(diri):
                sp_ = build_step_problem(
                    geom, material, old, traj.tau, dofmap=dofmap,
                    mass=mass, mass_scalar=mass_scalar, d_prev=d_prev,
                    f_avg=f_avg,
                )
                reactions = weak_momentum_residual(sp_, cur.u, cur.alpha, cur.v)
                inc += float(reactions[diri] @ du[diri])
        work[k] = work[k - 1] + inc

    return EnergyReport(
        kinetic=kinetic, elastic=elastic, phi=phi, gradient=gradient,
        visc_diss=visc, dam_diss=dam, ext_work=work, visc_diss_alt=visc_alt,
    )


def check_energy_inequality(report: EnergyReport, tau: float, tau0: float):
    """Per-step margins of the one-sided discrete energy estimate.

    margin_k = (initial energy + work) - (current energy + weighted
    dissipation); nonnegative margins certify the estimate.  The weight is
    1 - sqrt(tau/tau0); when tau0 is unavailable or tau > tau0 the check
    is advisory and the weight is floored at zero.
    """
    if tau0 is not None and tau0 > 0.0 and tau <= tau0:
        prefactor = 1.0 - np.sqrt(tau / tau0)
        certified = True
    else:
        prefactor = 0.0
        certified = False
    lhs = report.total + prefactor * (report.visc_diss + report.dam_diss)
    rhs = report.total[0] + report.ext_work
    return rhs - lhs, certified


def kinetic_telescoping_residual(traj: Trajectory, mass) -> float:
    """|sum_k (v_k - v_{k-1})^T M (v_k + v_{k-1})/2 - (T_K - T_0)|, relative.

    The midpoint pairing telescopes the kinetic energy exactly; this
    returns the floating point residual of that identity.
    """
    if mass is None:
        return 0.0
    acc = 0.0
    for k in range(1, traj.n_steps + 1):
        vo, vn = traj.states[k - 1].v, traj.states[k].v
        acc += 0.5 * float((vn - vo) @ (mass @ (vn + vo)))
    t0 = 0.5 * float(traj.states[0].v @ (mass @ traj.states[0].v))
    tk = 0.5 * float(traj.states[-1].v @ (mass @ traj.states[-1].v))
    scale = max(abs(tk - t0), tk + t0, 1e-300)
    return abs(acc - (tk - t0)) / scale


# ---------------------------------------------------------------------------
# a-priori diagnostics
# ---------------------------------------------------------------------------


def apriori_diagnostics(traj: Trajectory, geom: ElementGeometry,
                        material: MaterialParams) -> dict:
    """Discrete norms whose uniform boundedness the theory predicts.

    Returns u_h1h1 (displacement in H1 of time with H1 space norm),
    u_w1inf_l2 (velocity sup in L2), a_linf_w1p (damage sup in W^{1,p}) and
    a_h1l2 (damage rate in L2); refinement studies check these stay within
    a fixed factor across tau halving.
    """
    mass_scalar = assemble_scalar_mass(geom)
    stiff_scalar = scalar_stiffness(geom)
    d = geom.dim
    tau = traj.tau

    def h1_sq(u):
        acc = 0.0
        for c in range(d):
            uc = u[c::d]
            acc += float(uc @ (mass_scalar @ uc)) + float(uc @ (stiff_scalar @ uc))
        return acc

    def l2_sq(u):
        acc = 0.0
        for c in range(d):
            uc = u[c::d]
            acc += float(uc @ (mass_scalar @ uc))
        return acc

    gt = material.gradient
    p = gt.p

    def w1p(alpha):
        a_q = geom.alpha_at_quad(alpha)
        val_p = float(
            np.dot(geom.vols, (np.abs(a_q) ** p) @ geom.quad_w)
        )
        grad_p = _kernels.plap_terms(
            geom.gmat, geom.vols, alpha[geom.conn], 1.0, p, 0.0,
            GRADIENT_GUARD, True, False, False,
        )[0] * p
        return (val_p + grad_p) ** (1.0 / p)

    states = traj.states
    u_sq = 0.0
    du_sq = 0.0
    vel_sup = np.sqrt(l2_sq(states[0].u))
    a_sq = 0.0
    da_sq = 0.0
    a_sup = w1p(states[0].alpha)
    for k in range(1, len(states)):
        old, cur = states[k - 1], states[k]
        u_sq += 0.5 * tau * (h1_sq(old.u) + h1_sq(cur.u))
        du_rate = (cur.u - old.u) / tau
        du_sq += tau * h1_sq(du_rate)
        vel_sup = max(vel_sup, np.sqrt(l2_sq(cur.u)), np.sqrt(l2_sq(du_rate)))
        a_old = old.alpha
        a_cur = cur.alpha
        a_sq += 0.5 * tau * (
            float(a_old @ (mass_scalar @ a_old))
            + float(a_cur @ (mass_scalar @ a_cur))
        )
        da_rate = (a_cur - a_old) / tau
        da_sq += tau * float(da_rate @ (mass_scalar @ da_rate))
        a_sup = max(a_sup, w1p(a_cur))
    return {
        "u_h1h1": float(np.sqrt(u_sq + du_sq)),
        "u_w1inf_l2": float(vel_sup),
        "a_linf_w1p": float(a_sup),
        "a_h1l2": float(np.sqrt(a_sq + da_sq)),
    }


# ---------------------------------------------------------------------------
# the loop
# ---------------------------------------------------------------------------


def run_time_loop(
    geom: ElementGeometry,
    material: MaterialParams,
    initial: State,
    tau: float,
    n_steps: int,
    loads: LoadSpec = None,
    dofmap=None,
    cfg: SolverConfig = None,
    dq_phi=None,
    freeze_damage=False,
):
    """March n_steps implicit steps from the initial state.

    Returns (Trajectory, EnergyReport, list of StepStats); the report's
    ineq_margin is filled against the critical step when one exists.  On
    solver failure the partial trajectory travels with the exception.
    freeze_damage collapses the damage box to the previous iterate, which
    reduces the scheme to viscoelastodynamics on a fixed damage field.
    """
    if n_steps < 1:
        raise BadSpecError("need at least one step")
    cfg = cfg or SolverConfig()
    loads = loads or LoadSpec()
    mass = assemble_mass(geom, material.rho) if material.rho > 0.0 else None
    mass_scalar = assemble_scalar_mass(geom)
    if material.quasistatic and (
        dofmap is None or len(dofmap.dirichlet_values(initial.t)[0]) == 0
    ):
        raise BadSpecError(
            "quasistatic problems (rho = 0) need at least one Dirichlet "
            "constraint to fix rigid motions"
        )

    states = [initial]
    all_stats = []
    chi_static = material.viscosity.chi_r == 0.0
    d_prev = None
    for k in range(1, n_steps + 1):
        prev = states[-1]
        if d_prev is None or not chi_static:
            d_prev = viscosity_matrix(geom, material, prev.alpha)
        sp_ = build_step_problem(
            geom, material, prev, tau, loads=loads, dofmap=dofmap,
            mass=mass, mass_scalar=mass_scalar, d_prev=d_prev,
            dq_phi=dq_phi,
            box_lower=prev.alpha.copy() if freeze_damage else None,
        )
        try:
            u, alpha, stats = solve_step(sp_, cfg)
        except NoConvergenceError as exc:
            exc.step = k
            exc.trajectory = Trajectory(tau=tau, states=states)
            raise
        v = velocity_update(u, prev.u, prev.v, tau)
        states.append(State(k=k, t=prev.t + tau, u=u, v=v, alpha=alpha))
        all_stats.append(stats)

    traj = Trajectory(tau=tau, states=states)
    report = energy_report(traj, geom, material, loads, dofmap)
    try:
        tau0 = critical_timestep(material)
    except NotPositiveDefiniteError:
        tau0 = None
    margins, _ = check_energy_inequality(report, tau, tau0)
    report.ineq_margin = margins
    return traj, report, all_stats
