"""Time step refinement studies and solver mode comparison.

A study runs one scenario on a sequence of halved time steps, compares
consecutive levels at the shared grid times in the L2 norm, and turns
the pairwise differences into empirical convergence orders.  When the
scenario is linear (frozen damage, homogeneous supports, no loads) the
study also measures errors against the exact modal solution of the
matching damped equation of motion: the scheme's midpoint velocity
update acts on each mode like an extra viscous damper of strength
tau * k / 2, and convergence is second order once that damper is part
of the reference, first order otherwise.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .assembly import (
    assemble_degraded_stiffness,
    assemble_mass,
    assemble_scalar_mass,
)
from .errors import BadSpecError
from .integrator import run_time_loop
from .scenarios import RunSetup, Scenario, adjust_tau, run_scenario
from .step_problem import build_step_problem, viscosity_matrix


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------


@dataclass
class StudyResult:
    """Outcome of a tau refinement study.

    diffs_* hold max-over-shared-grid L2 norms between consecutive
    levels, orders_* their dyadic logarithms; oracle_errors/orders are
    present only when an exact modal reference applies.  newton_iters
    and sweeps are the per-level totals.
    """

    scenario_name: str
    taus: list
    n_steps: list
    diffs_u: np.ndarray
    diffs_alpha: np.ndarray
    orders_u: np.ndarray
    orders_alpha: np.ndarray
    cauchy_ok_u: bool
    cauchy_ok_alpha: bool
    newton_iters: list
    sweeps: list
    wall_times: list
    oracle_errors: np.ndarray = None
    oracle_orders: np.ndarray = None

    def summary_lines(self):
        lines = [f"refinement study: {self.scenario_name}"]
        header = f"{'tau':>12} {'steps':>6} {'newton':>7} {'sweeps':>7}"
        has_oracle = self.oracle_errors is not None
        if has_oracle:
            header += f" {'oracle error':>13}"
        lines.append(header)
        for i, tau in enumerate(self.taus):
            row = (
                f"{tau:>12.6g} {self.n_steps[i]:>6d} "
                f"{self.newton_iters[i]:>7d} {self.sweeps[i]:>7d}"
            )
            if has_oracle:
                row += f" {self.oracle_errors[i]:>13.4e}"
            lines.append(row)
        for label, diffs, orders in (
            ("u", self.diffs_u, self.orders_u),
            ("alpha", self.diffs_alpha, self.orders_alpha),
        ):
            diff_text = ", ".join(f"{d:.4e}" for d in diffs)
            order_text = ", ".join(f"{o:.3f}" for o in orders)
            lines.append(f"level differences ({label}): {diff_text}")
            lines.append(f"empirical orders ({label}): {order_text or 'n/a'}")
        lines.append(
            "cauchy decrease: u "
            + ("ok" if self.cauchy_ok_u else "FAILED")
            + ", alpha "
            + ("ok" if self.cauchy_ok_alpha else "FAILED")
        )
        if has_oracle:
            order_text = ", ".join(f"{o:.3f}" for o in self.oracle_orders)
            lines.append(f"orders against modal solution: {order_text}")
        return lines


# ---------------------------------------------------------------------------
# exact modal reference
# ---------------------------------------------------------------------------


def _damped_mode(k, c, q0, p0, times):
    """q'' + c q' + k q = 0 with q(0) = q0, q'(0) = p0, unit mass."""
    disc = 0.25 * c * c - k
    t = np.asarray(times, dtype=float)
    decay = np.exp(-0.5 * c * t)
    if disc < 0.0:
        w = np.sqrt(-disc)
        return decay * (
            q0 * np.cos(w * t) + (p0 + 0.5 * c * q0) / w * np.sin(w * t)
        )
    if disc == 0.0:
        return decay * (q0 + (p0 + 0.5 * c * q0) * t)
    root = np.sqrt(disc)
    r_plus, r_minus = -0.5 * c + root, -0.5 * c - root
    a = (p0 - r_minus * q0) / (r_plus - r_minus)
    return a * np.exp(r_plus * t) + (q0 - a) * np.exp(r_minus * t)


def modal_reference(setup: RunSetup, tau: float, times):
    """Exact solution of the matching per-mode damped oscillator, or None.

    Applies when the run is linear: frozen damage, no loads, homogeneous
    constant supports, inertia present, and a viscosity that the modal
    basis diagonalizes.  Each mode k gets damping c + tau * k / 2; the
    second term reproduces the dissipation the discrete velocity update
    adds, so errors against this reference show the scheme's genuine
    order.
    """
    material = setup.material
    if material.rho <= 0.0:
        return None
    if setup.loads.body is not None or setup.loads.tractions:
        return None
    for t_probe in (times[0], times[-1]):
        _, vals = setup.dofmap.dirichlet_values(t_probe)
        if len(vals) and np.any(vals != 0.0):
            return None

    free = setup.dofmap.free_u_mask()
    mass = assemble_mass(setup.geom, material.rho)
    stiff = assemble_degraded_stiffness(
        setup.geom, material.degradation, material.elastic.matrix,
        setup.initial.alpha,
    )
    damp = viscosity_matrix(setup.geom, material, setup.initial.alpha)
    m = mass.toarray()[np.ix_(free, free)]
    k = stiff.toarray()[np.ix_(free, free)]
    c = (
        damp.toarray()[np.ix_(free, free)]
        if damp is not None else np.zeros_like(m)
    )
    lam, phi = scipy.linalg.eigh(k, m)
    c_modal = phi.T @ c @ phi
    if not np.allclose(c_modal, np.diag(np.diag(c_modal)),
                       atol=1e-10 * max(1.0, np.abs(c_modal).max())):
        return None

    q0 = phi.T @ (m @ setup.initial.u[free])
    p0 = phi.T @ (m @ setup.initial.v[free])
    n_modes = len(lam)
    q = np.zeros((len(times), n_modes))
    for i in range(n_modes):
        c_eff = c_modal[i, i] + 0.5 * tau * lam[i]
        q[:, i] = _damped_mode(lam[i], c_eff, q0[i], p0[i], times)
    u = np.zeros((len(times), setup.geom.n_u))
    u[:, free] = q @ phi.T
    return u


# ---------------------------------------------------------------------------
# the study
# ---------------------------------------------------------------------------


def run_convergence_study(sc: Scenario, levels: int = 3,
                          tau: float = None) -> StudyResult:
    """Run the scenario on `levels` halved time steps and compare them.

    The base step is the scenario's (or `tau`), snapped to divide t_end;
    every level halves it, so grids nest and states are compared at the
    coarse grid indices without interpolation.
    """
    if levels < 3:
        raise BadSpecError("a refinement study needs at least 3 levels")
    base, n0, _ = adjust_tau(sc.t_end, tau if tau is not None else sc.tau)
    taus = [base / 2**i for i in range(levels)]

    def one(level_tau):
        start = time.perf_counter()
        run = run_scenario(sc, tau=level_tau)
        return run, time.perf_counter() - start

    with ThreadPoolExecutor(max_workers=min(levels, 4)) as pool:
        results = list(pool.map(one, taus))
    runs = [r for r, _ in results]
    walls = [w for _, w in results]

    setup = runs[0].setup
    mass_scalar = assemble_scalar_mass(setup.geom)
    dim = setup.geom.dim

    def l2_u(vec):
        acc = 0.0
        for comp in range(dim):
            v = vec[comp::dim]
            acc += float(v @ (mass_scalar @ v))
        return np.sqrt(acc)

    def l2_a(vec):
        return np.sqrt(float(vec @ (mass_scalar @ vec)))

    diffs_u, diffs_a = [], []
    for lvl in range(levels - 1):
        coarse = runs[lvl].trajectory
        fine = runs[lvl + 1].trajectory
        worst_u = worst_a = 0.0
        for k in range(coarse.n_steps + 1):
            su, sf = coarse.states[k], fine.states[2 * k]
            worst_u = max(worst_u, l2_u(sf.u - su.u))
            worst_a = max(worst_a, l2_a(sf.alpha - su.alpha))
        diffs_u.append(worst_u)
        diffs_a.append(worst_a)
    diffs_u = np.array(diffs_u)
    diffs_a = np.array(diffs_a)

    def orders(diffs):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log2(diffs[:-1] / diffs[1:])

    floor = 1e-14
    cauchy_u = bool(np.all(np.diff(diffs_u) <= floor * max(1, diffs_u.max())))
    cauchy_a = bool(
        np.all(np.diff(diffs_a) <= floor * max(1.0, diffs_a.max()))
        or diffs_a.max() <= floor
    )

    oracle_errors = oracle_orders = None
    times0 = [st.t for st in runs[0].trajectory.states]
    if modal_reference(setup, taus[0], times0) is not None:
        errs = []
        for run, level_tau in zip(runs, taus):
            times = [st.t for st in run.trajectory.states]
            exact = modal_reference(run.setup, level_tau, times)
            worst = 0.0
            for i, st in enumerate(run.trajectory.states):
                worst = max(worst, l2_u(st.u - exact[i]))
            errs.append(worst)
        oracle_errors = np.array(errs)
        oracle_orders = orders(oracle_errors)

    return StudyResult(
        scenario_name=sc.name,
        taus=taus,
        n_steps=[r.trajectory.n_steps for r in runs],
        diffs_u=diffs_u,
        diffs_alpha=diffs_a,
        orders_u=orders(diffs_u),
        orders_alpha=orders(diffs_a),
        cauchy_ok_u=cauchy_u,
        cauchy_ok_alpha=cauchy_a,
        newton_iters=[sum(s.iterations for s in r.stats) for r in runs],
        sweeps=[sum(s.sweeps or 0 for s in r.stats) for r in runs],
        wall_times=walls,
        oracle_errors=oracle_errors,
        oracle_orders=oracle_orders,
    )


# ---------------------------------------------------------------------------
# solver mode comparison
# ---------------------------------------------------------------------------


@dataclass
class ModeComparison:
    """Monolithic versus staggered run of the same scenario.

    max_energy_diff is the largest per-step difference measured in the
    energy norm of the monolithic step's Hessian, relative to the state
    scale; the iteration ledgers let cost be compared honestly.
    """

    max_energy_diff: float
    step_diffs: np.ndarray
    newton_iters_monolithic: list
    newton_iters_staggered: list
    sweeps_staggered: list


def compare_solver_modes(sc: Scenario, tau: float = None) -> ModeComparison:
    """Run both solver modes and measure their disagreement per step."""
    level_tau, n_steps, _ = adjust_tau(
        sc.t_end, tau if tau is not None else sc.tau
    )
    setup = sc.build()

    def march(mode):
        cfg = replace(setup.cfg, mode=mode)
        return run_time_loop(
            setup.geom, setup.material, setup.initial, level_tau, n_steps,
            loads=setup.loads, dofmap=setup.dofmap, cfg=cfg,
            freeze_damage=sc.freeze_damage,
        )
    traj_m, _, stats_m = march("monolithic")
    traj_s, _, stats_s = march("staggered")

    diffs = []
    for k in range(1, n_steps + 1):
        prev = traj_m.states[k - 1]
        sp_ = build_step_problem(
            setup.geom, setup.material, prev, level_tau,
            loads=setup.loads, dofmap=setup.dofmap,
        )
        cur = traj_m.states[k]
        ev = sp_.evaluate(cur.u, cur.alpha, want_grad=False, want_hess=True)
        h = sp_.reduce_matrix(ev.hessian)
        x = sp_.join(cur.u, cur.alpha)
        d = sp_.join(
            traj_s.states[k].u - cur.u,
            traj_s.states[k].alpha - cur.alpha,
        )
        scale = max(1.0, np.sqrt(abs(float(x @ (h @ x)))))
        diffs.append(np.sqrt(abs(float(d @ (h @ d)))) / scale)
    diffs = np.array(diffs)
    return ModeComparison(
        max_energy_diff=float(diffs.max()),
        step_diffs=diffs,
        newton_iters_monolithic=[s.iterations for s in stats_m],
        newton_iters_staggered=[s.iterations for s in stats_s],
        sweeps_staggered=[s.sweeps or 0 for s in stats_s],
    )
