"""Box-constrained Newton solver for the per-step incremental problem.

Strategy: at each iterate the damage bounds that are active and whose
gradient pushes outward are frozen, a sparse symmetric factorization
solves the Newton system on the remaining free set, and backtracking with
projection onto the box globalizes the step.  Below the critical time
step the problem is strictly convex, so the monitored smallest-eigenvalue
estimate stays positive and the minimizer is unique; above it the solver
still runs but stamps its result uncertified and caps the step length.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    LinearSolveFailureError,
    MaxSweepsError,
    NoConvergenceError,
)
from .step_problem import StepProblem

ARMIJO_DEFAULT = 1.0e-4
REFINEMENT_TOL = 1.0e-12


@dataclass
class SolverConfig:
    """Tolerances and limits of the step solver.

    grad_tol is relative: the convergence test uses
    grad_tol * max(1, initial projected-gradient norm).
    """

    grad_tol: float = 1.0e-9
    max_newton: int = 100
    armijo: float = ARMIJO_DEFAULT
    shrink: float = 0.5
    max_backtracks: int = 40
    mode: str = "monolithic"
    max_sweeps: int = 200
    step_cap: float = 1.0e3   # trust-region cap used only when uncertified
    monitor_eigs: bool = True

    def __post_init__(self):
        if self.grad_tol <= 0.0 or self.armijo <= 0.0:
            raise ValueError("tolerances must be positive")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink must be in (0, 1)")
        if self.max_newton < 1:
            raise ValueError("max_newton must be >= 1")
        if self.mode not in ("monolithic", "staggered"):
            raise ValueError(f"unknown solver mode {self.mode!r}")


@dataclass
class StepStats:
    """Per-step solver diagnostics."""

    iterations: int = 0
    backtracks: int = 0
    pg_norm: float = np.inf
    active_lower: int = 0
    active_upper: int = 0
    min_eig_estimate: float = np.nan
    certified: bool = True
    sweeps: int = 0
    wall_time: float = 0.0
    energy: float = np.nan
    energy_history: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# pieces
# ---------------------------------------------------------------------------


def velocity_update(u_new, u_old, v_old, tau):
    """Midpoint velocity: the new velocity averaging to the step slope."""
    return 2.0 / tau * (np.asarray(u_new) - np.asarray(u_old)) - np.asarray(v_old)


def projected_gradient(g_a, alpha, lower, upper, tol=0.0):
    """Gradient with outward components removed at active bounds.

    Applied sequentially so a degenerate box (lower = upper) zeroes the
    component from both sides.
    """
    pg = g_a.copy()
    at_lo = alpha <= lower + tol
    at_hi = alpha >= upper - tol
    pg[at_lo] = np.minimum(pg[at_lo], 0.0)
    pg[at_hi] = np.maximum(pg[at_hi], 0.0)
    return pg


def kkt_residual(sp_: StepProblem, u, alpha) -> float:
    """Max violation of the box stationarity conditions.

    Zero at an exact solution: displacement gradient vanishes on free dofs,
    the damage gradient vanishes on the box interior, is >= 0 where alpha
    sits at the lower bound and <= 0 at the upper bound.
    """
    g = sp_.evaluate(u, alpha).gradient
    g_u = g[: sp_.n_u][sp_.free_u]
    pg_a = projected_gradient(
        g[sp_.n_u:], alpha, sp_.box_lower, sp_.box_upper
    )
    parts = [np.abs(pg_a)]
    if g_u.size:
        parts.append(np.abs(g_u))
    return float(max(np.max(p) if p.size else 0.0 for p in parts))


def _min_eig_estimate(h, n_iter=20, seed=0):
    """Smallest-eigenvalue estimate by a short Lanczos recursion.

    Plain 20-iteration Lanczos on the reduced Hessian; good to a few
    percent on the spectra seen here, used as a monitor only.
    """
    n = h.shape[0]
    if n == 0:
        return 0.0
    if n <= 40:
        return float(np.linalg.eigvalsh(h.toarray())[0])
    rng = np.random.default_rng(seed)
    q = rng.standard_normal(n)
    q /= np.linalg.norm(q)
    alphas, betas = [], []
    q_prev = np.zeros(n)
    beta = 0.0
    basis = []
    for _ in range(min(n_iter, n)):
        basis.append(q)
        w = h @ q - beta * q_prev
        a = float(q @ w)
        w -= a * q
        # full reorthogonalization; 20 vectors keep this cheap
        for b in basis:
            w -= (b @ w) * b
        alphas.append(a)
        beta = float(np.linalg.norm(w))
        if beta < 1e-14:
            break
        betas.append(beta)
        q_prev, q = q, w / beta
    t = np.diag(alphas)
    if betas:
        b = np.array(betas[: len(alphas) - 1])
        t += np.diag(b, 1) + np.diag(b, -1)
    return float(np.linalg.eigvalsh(t)[0])


def _factor_solve(h, rhs):
    try:
        lu = spla.splu(h.tocsc())
        x = lu.solve(rhs)
        # one step of iterative refinement
        r = rhs - h @ x
        if np.linalg.norm(r) > REFINEMENT_TOL * max(1.0, np.linalg.norm(rhs)):
            x = x + lu.solve(r)
        return x
    except RuntimeError as exc:
        raise LinearSolveFailureError(f"sparse factorization failed: {exc}") from exc
    except ValueError as exc:
        raise LinearSolveFailureError(f"singular Newton system: {exc}") from exc


# ---------------------------------------------------------------------------
# monolithic projected Newton
# ---------------------------------------------------------------------------


def solve_step(sp_: StepProblem, cfg: SolverConfig = None, start=None):
    """Minimize the step potential over the damage box.

    Returns (u, alpha, StepStats).  The default start is the feasible warm
    start (free flight in u, previous damage); a custom feasible start may
    be passed for uniqueness experiments.  Raises NoConvergence when the
    iteration cap is hit (carries the stats for post-mortem reporting).
    """
    cfg = cfg or SolverConfig()
    if cfg.mode == "staggered":
        return staggered_step(sp_, cfg)
    t_start = time.perf_counter()
    stats = StepStats()

    certified = _certified(sp_)
    stats.certified = certified

    n_u, n_a = sp_.n_u, sp_.n_a
    n_f = len(sp_.free_u)
    lower, upper = sp_.box_lower, sp_.box_upper
    if start is None:
        u, alpha = sp_.start_point()
    else:
        u = np.array(start[0], dtype=float)
        u[sp_.diri_dofs] = sp_.diri_vals
        alpha = np.clip(np.array(start[1], dtype=float), lower, upper)

    ev = sp_.evaluate(u, alpha, want_grad=True)
    value = ev.value
    stats.energy_history.append(value)
    pg0 = _pg_norm(sp_, ev.gradient, alpha)
    tol = cfg.grad_tol * max(1.0, pg0)
    bound_tol = 1e-14 * max(1.0, float(np.max(upper)) if n_a else 1.0)

    min_eig_seen = np.inf
    for it in range(cfg.max_newton):
        g = ev.gradient
        pg = _pg_norm(sp_, g, alpha)
        stats.pg_norm = pg
        stats.iterations = it
        if pg <= tol:
            break

        hess = sp_.evaluate(u, alpha, want_grad=False, want_hess=True).hessian
        g_red = sp_.reduce_vector(g)
        h_red = sp_.reduce_matrix(hess)

        # active set: at a bound with the gradient pointing outward,
        # plus nodes whose box is a single point (frozen damage)
        g_a = g[n_u:]
        at_lo = (alpha <= lower + bound_tol) & (g_a > 0.0)
        at_hi = (alpha >= upper - bound_tol) & (g_a < 0.0)
        frozen = upper - lower <= bound_tol
        fixed = np.zeros(n_f + n_a, dtype=bool)
        fixed[n_f:] = at_lo | at_hi | frozen
        free = np.flatnonzero(~fixed)

        h_ff = h_red[free][:, free].tocsc()
        if cfg.monitor_eigs:
            est = _min_eig_estimate(h_ff, seed=it)
            min_eig_seen = min(min_eig_seen, est)
            stats.min_eig_estimate = min_eig_seen

        step_red = np.zeros(n_f + n_a)
        step_red[free] = _factor_solve(h_ff, -g_red[free])

        if not certified:
            # keep uncertified steps inside a trust region
            norm = np.linalg.norm(step_red)
            cap = cfg.step_cap * max(1.0, np.linalg.norm(sp_.join(u, alpha)))
            if norm > cap:
                step_red *= cap / norm
            if float(g_red @ step_red) >= 0.0:
                step_red = -g_red  # indefinite system: fall back to descent

        x = sp_.join(u, alpha)
        slope = float(g_red @ step_red)
        t_ls = 1.0
        accepted = False
        # the predicted decrease shrinks below the resolution of the
        # potential value near convergence; the slack keeps the Armijo
        # test meaningful there
        slack = 100.0 * np.finfo(float).eps * max(1.0, abs(value))
        for _ in range(cfg.max_backtracks):
            x_trial = x + t_ls * step_red
            x_trial[n_f:] = np.clip(x_trial[n_f:], lower, upper)
            u_t, a_t = sp_.split(x_trial)
            v_trial = sp_.evaluate(u_t, a_t, want_grad=False).value
            # Armijo on the projected step
            dec = float(g_red @ (x_trial - x))
            if v_trial <= value + cfg.armijo * min(dec, t_ls * slope) + slack:
                accepted = True
                break
            t_ls *= cfg.shrink
            stats.backtracks += 1
        if not accepted:
            stats.iterations = it + 1
            stats.wall_time = time.perf_counter() - t_start
            raise NoConvergenceError(
                f"line search failed at iteration {it} (pg {pg:.3e})",
                stats=stats,
            )
        u, alpha = u_t, a_t
        value = v_trial
        stats.energy_history.append(value)
        ev = sp_.evaluate(u, alpha, want_grad=True)
    else:
        stats.iterations = cfg.max_newton
        stats.pg_norm = _pg_norm(sp_, ev.gradient, alpha)
        stats.wall_time = time.perf_counter() - t_start
        raise NoConvergenceError(
            f"projected Newton did not reach tol {tol:.3e} in "
            f"{cfg.max_newton} iterations (pg {stats.pg_norm:.3e}, "
            f"certified={certified})",
            stats=stats,
        )

    g_a = ev.gradient[n_u:]
    stats.active_lower = int(np.sum((alpha <= lower + bound_tol) & (g_a > 0)))
    stats.active_upper = int(np.sum((alpha >= upper - bound_tol) & (g_a < 0)))
    stats.energy = value
    stats.wall_time = time.perf_counter() - t_start
    return u, alpha, stats


def _certified(sp_: StepProblem) -> bool:
    """True when the step is in the provably convex regime."""
    from .materials import critical_timestep
    from .errors import NotPositiveDefiniteError

    if not sp_.material.damage_energy.concave or sp_.dq_phi:
        return False
    try:
        return sp_.tau <= critical_timestep(sp_.material) * (1 + 1e-12)
    except NotPositiveDefiniteError:
        return False


def _pg_norm(sp_: StepProblem, g, alpha):
    g_u = g[: sp_.n_u][sp_.free_u]
    pg_a = projected_gradient(g[sp_.n_u:], alpha, sp_.box_lower, sp_.box_upper,
                              tol=1e-14)
    return float(np.sqrt(np.dot(g_u, g_u) + np.dot(pg_a, pg_a)))


# ---------------------------------------------------------------------------
# staggered baseline
# ---------------------------------------------------------------------------


def staggered_step(sp_: StepProblem, cfg: SolverConfig = None):
    """Alternate u-solves (damage fixed) and damage solves (u fixed).

    Comparison baseline: each half step minimizes the same potential in one
    variable block, so the potential decreases monotonically; convergence
    is declared when a full sweep moves the iterate less than the gradient
    tolerance in the max norm.
    """
    cfg = cfg or SolverConfig()
    t_start = time.perf_counter()
    stats = StepStats(certified=_certified(sp_))
    u, alpha = sp_.start_point()
    n_u = sp_.n_u
    free = sp_.free_u

    ev = sp_.evaluate(u, alpha, want_grad=True)
    stats.energy_history.append(ev.value)
    tol = cfg.grad_tol * max(1.0, _pg_norm(sp_, ev.gradient, alpha))
    total_newton = 0
    for sweep in range(1, cfg.max_sweeps + 1):
        u_old, a_old = u.copy(), alpha.copy()

        # u half step: quadratic in u, one SPD solve on the free dofs
        ev = sp_.evaluate(u, alpha, want_grad=True, want_hess=True)
        h_uu = ev.hessian[:n_u, :n_u][free][:, free]
        du = _factor_solve(h_uu.tocsc(), -ev.gradient[:n_u][free])
        u = u.copy()
        u[free] += du

        # damage half step: box-constrained Newton with u frozen
        alpha, inner = _alpha_solve(sp_, u, alpha, cfg, tol)
        total_newton += inner + 1

        stats.sweeps = sweep
        move = max(
            float(np.max(np.abs(u - u_old))) if u.size else 0.0,
            float(np.max(np.abs(alpha - a_old))) if alpha.size else 0.0,
        )
        ev = sp_.evaluate(u, alpha, want_grad=True)
        stats.energy_history.append(ev.value)
        pg = _pg_norm(sp_, ev.gradient, alpha)
        stats.pg_norm = pg
        if pg <= tol or move <= tol:
            break
    else:
        stats.wall_time = time.perf_counter() - t_start
        raise MaxSweepsError(
            f"staggered iteration did not converge in {cfg.max_sweeps} sweeps "
            f"(pg {stats.pg_norm:.3e})",
            stats=stats,
        )
    stats.iterations = total_newton
    stats.energy = sp_.evaluate(u, alpha, want_grad=False).value
    stats.wall_time = time.perf_counter() - t_start
    return u, alpha, stats


def _alpha_solve(sp_: StepProblem, u, alpha, cfg, tol):
    """Projected Newton in the damage block only (u frozen)."""
    n_u, n_a = sp_.n_u, sp_.n_a
    lower, upper = sp_.box_lower, sp_.box_upper
    bound_tol = 1e-14
    alpha = alpha.copy()
    ev = sp_.evaluate(u, alpha, want_grad=True)
    value = ev.value
    for it in range(cfg.max_newton):
        g_a = ev.gradient[n_u:]
        pg = projected_gradient(g_a, alpha, lower, upper, tol=1e-14)
        if np.linalg.norm(pg) <= tol:
            return alpha, it
        hess = sp_.evaluate(u, alpha, want_grad=False, want_hess=True).hessian
        h_aa = hess[n_u:, n_u:]
        at_lo = (alpha <= lower + bound_tol) & (g_a > 0.0)
        at_hi = (alpha >= upper - bound_tol) & (g_a < 0.0)
        frozen = upper - lower <= bound_tol
        free = np.flatnonzero(~(at_lo | at_hi | frozen))
        step = np.zeros(n_a)
        if free.size:
            step[free] = _factor_solve(
                h_aa[free][:, free].tocsc(), -g_a[free]
            )
        t_ls = 1.0
        slack = 100.0 * np.finfo(float).eps * max(1.0, abs(value))
        for _ in range(cfg.max_backtracks):
            a_t = np.clip(alpha + t_ls * step, lower, upper)
            v_t = sp_.evaluate(u, a_t, want_grad=False).value
            if v_t <= value + cfg.armijo * float(g_a @ (a_t - alpha)) + slack:
                break
            t_ls *= cfg.shrink
        alpha, value = a_t, v_t
        ev = sp_.evaluate(u, alpha, want_grad=True)
    return alpha, cfg.max_newton
