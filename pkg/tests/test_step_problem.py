"""Incremental potential tests.

The single-element oracle evaluates every term of the step functional with
plain scalar arithmetic; derivative checks use central finite differences;
the convexity checks use dense eigensolves of the reduced Hessian.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from kvdamage.assembly import LoadSpec, element_geometry
from kvdamage.errors import BadSpecError, InfeasibleError
from kvdamage.materials import (
    ATDegradation,
    ATQuadraticDamage,
    CustomDamageEnergy,
    DissipationLaw,
    ElasticTensor,
    GradientTerm,
    MaterialParams,
    ViscosityModel,
    critical_timestep,
)
from kvdamage.mesh import DofMap, build_interval_mesh, build_rectangle_mesh
from kvdamage.step_problem import (
    State,
    build_step_problem,
    feasible_box,
    potential_gradient,
    potential_hessian,
    potential_value,
    weak_momentum_residual,
)


def make_material(dim, d0_scale=0.5, chi_r=0.25, eta=0.7, rho=1.3, p=2.0,
                  damage_energy=None):
    elastic = ElasticTensor.isotropic(0.0 if dim == 1 else 1.0, 1.0, dim)
    return MaterialParams(
        degradation=ATDegradation(0.1),
        elastic=elastic,
        viscosity=ViscosityModel(
            elastic.scaled(d0_scale) if d0_scale else None, chi_r
        ),
        damage_energy=damage_energy or ATQuadraticDamage(1.5, 0.2),
        gradient=GradientTerm(0.3, p),
        rho=rho,
        dissipation=DissipationLaw(eta, allow_zero=(eta == 0.0)),
    )


def make_problem(dim=1, n=6, tau=0.02, loads=True, dirichlet=True, seed=0,
                 **matkw):
    if dim == 1:
        mesh = build_interval_mesh(2.0, n)
    else:
        mesh = build_rectangle_mesh(1.0, 1.0, n, n)
    geom = element_geometry(mesh)
    mat = make_material(dim, **matkw)
    dm = DofMap(mesh)
    if dirichlet:
        if dim == 1:
            dm.constrain("left", 0, 0.0)
        else:
            dm.constrain("bottom", 0, 0.0)
            dm.constrain("bottom", 1, lambda t: 0.02 * t)
    if loads:
        pull = np.zeros(dim)
        pull[-1] = 1.0
        ld = LoadSpec(
            body=lambda t, x: (0.3 + 0.2 * t) * np.tile(pull, (len(x), 1)),
            tractions={
                ("right" if dim == 1 else "top"): lambda t, x: (
                    0.8 * t * np.tile(pull, (len(x), 1))
                )
            },
        )
    else:
        ld = None
    rng = np.random.default_rng(seed)
    prev = State(
        k=3,
        t=0.3,
        u=0.05 * rng.standard_normal(geom.n_u),
        v=0.1 * rng.standard_normal(geom.n_u),
        alpha=rng.uniform(0.7, 1.0, geom.n_a),
    )
    sp_ = build_step_problem(geom, mat, prev, tau, loads=ld, dofmap=dm)
    return sp_, rng


def random_feasible(sp_, rng):
    u = sp_.prev.u + 0.1 * rng.standard_normal(sp_.n_u)
    u[sp_.diri_dofs] = sp_.diri_vals
    alpha = rng.uniform(0.25, 0.75, sp_.n_a) * sp_.box_upper
    return u, alpha


# ---------------------------------------------------------------------------
# value oracle
# ---------------------------------------------------------------------------


class TestValue:
    def test_single_element_hand_computation(self):
        length, tau = 2.0, 0.05
        mesh = build_interval_mesh(length, 1)
        geom = element_geometry(mesh)
        mat = make_material(1)
        prev = State(k=0, t=0.3, u=[0.1, -0.2], v=[0.05, 0.4], alpha=[1.0, 0.8])
        loads = LoadSpec(
            body=lambda t, x: np.full((len(x), 1), 2.0 + t),
            tractions={"right": lambda t, x: np.full((len(x), 1), 1.1)},
        )
        sp_ = build_step_problem(geom, mat, prev, tau, loads=loads)
        u = np.array([0.0, 0.3])
        alpha = np.array([0.9, 0.6])
        ev = sp_.evaluate(u, alpha)

        # everything below is scalar arithmetic on the same data
        gamma = lambda a: (0.01 + a * a) / 2.0
        phi = lambda a: -1.5 * (1.0 - a) ** 2 / (2.0 * 0.2)
        xi = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
        a_q = alpha[0] * (1 - xi) + alpha[1] * xi
        a0_q = 1.0 * (1 - xi) + 0.8 * xi
        m_el = 1.3 * length / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
        ms_el = length / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])

        w = (u - prev.u) / tau - prev.v
        inertia = w @ m_el @ w
        strain = (u[1] - u[0]) / length
        gbar = gamma(a_q).mean()
        elastic = 0.5 * length * gbar * 2.0 * strain**2
        damage = length * (-phi(a_q)).mean()
        grad_a = (alpha[1] - alpha[0]) / length
        gradient = length * 0.3 / 2.0 * grad_a**2
        dbar = 1.0 + 0.25 * gamma(a0_q).mean() * 2.0
        dstrain = ((u - prev.u)[1] - (u - prev.u)[0]) / length
        viscous = 0.5 / tau * length * dbar * dstrain**2
        da = alpha - prev.alpha
        zeta = 0.5 * 0.7 / tau * da @ ms_el @ da
        f_mean = 2.0 + (0.3 + 0.35) / 2.0
        f_vec = np.array([f_mean * length / 2.0, f_mean * length / 2.0 + 1.1])
        load = -f_vec @ u

        expected = {
            "inertia": inertia, "elastic": elastic, "damage": damage,
            "gradient": gradient, "viscous": viscous, "zeta": zeta,
            "load": load,
        }
        for name, ref in expected.items():
            assert_allclose(ev.terms[name], ref, rtol=1e-12, err_msg=name)
        assert_allclose(ev.value, sum(expected.values()), rtol=1e-12)

    def test_free_flight_zeroes_inertia(self):
        sp_, _ = make_problem(dirichlet=False, loads=False)
        u, alpha = sp_.start_point()
        ev = sp_.evaluate(u, alpha)
        assert abs(ev.terms["inertia"]) < 1e-24  # squared roundoff only
        assert ev.terms["zeta"] == 0.0

    def test_rest_state_value_is_stored_energy(self):
        sp_, _ = make_problem(dirichlet=False, loads=False)
        sp_.prev.v[:] = 0.0
        ev = sp_.evaluate(sp_.prev.u, sp_.prev.alpha)
        for name in ("inertia", "viscous", "zeta", "load"):
            assert ev.terms[name] == 0.0
        assert ev.value == ev.terms["elastic"] + ev.terms["damage"] + ev.terms["gradient"]

    def test_breakdown_sums_to_value(self):
        sp_, rng = make_problem(dim=2, n=3)
        u, alpha = random_feasible(sp_, rng)
        ev = sp_.evaluate(u, alpha)
        assert_allclose(ev.value, sum(ev.terms.values()), rtol=1e-12)
        assert set(ev.terms) == {
            "inertia", "elastic", "damage", "gradient", "load", "viscous", "zeta"
        }


class TestBox:
    def test_feasible_box(self):
        sp_, _ = make_problem()
        lo, hi = feasible_box(sp_)
        assert np.all(lo == 0.0)
        assert np.array_equal(hi, sp_.prev.alpha)

    def test_infeasible_raises(self):
        sp_, rng = make_problem()
        u, alpha = random_feasible(sp_, rng)
        bad = alpha.copy()
        bad[2] = sp_.box_upper[2] + 1e-9
        with pytest.raises(InfeasibleError):
            potential_value(sp_, u, bad)
        bad[2] = -1e-9
        with pytest.raises(InfeasibleError):
            potential_value(sp_, u, bad)

    def test_bounds_and_tiny_violation_ok(self):
        sp_, rng = make_problem()
        u, _ = random_feasible(sp_, rng)
        potential_value(sp_, u, sp_.box_upper)
        potential_value(sp_, u, np.zeros(sp_.n_a))
        potential_value(sp_, u, sp_.box_upper + 1e-13)

    def test_degenerate_box(self):
        sp_, rng = make_problem()
        sp_.box_upper[:] = 0.0
        u, _ = random_feasible(sp_, rng)
        potential_value(sp_, u, np.zeros(sp_.n_a))
        with pytest.raises(InfeasibleError):
            potential_value(sp_, u, np.full(sp_.n_a, 0.5))


# ---------------------------------------------------------------------------
# derivatives
# ---------------------------------------------------------------------------


class TestDerivatives:
    @pytest.mark.parametrize("dim,n", [(1, 6), (2, 3)])
    def test_gradient_matches_fd(self, dim, n):
        sp_, rng = make_problem(dim=dim, n=n, seed=dim)
        for state in range(5):
            u, alpha = random_feasible(sp_, rng)
            x = sp_.join(u, alpha)
            g = sp_.reduce_vector(sp_.evaluate(u, alpha).gradient)
            scale = max(1.0, np.max(np.abs(g)))
            h = 1e-6
            for i in rng.choice(len(x), size=min(12, len(x)), replace=False):
                e = np.zeros(len(x))
                e[i] = h
                fp = potential_value(sp_, *sp_.split(x + e))
                fm = potential_value(sp_, *sp_.split(x - e))
                assert abs((fp - fm) / (2 * h) - g[i]) < 1e-6 * scale

    @pytest.mark.parametrize("dim,n", [(1, 6), (2, 3)])
    def test_hessian_vector_matches_fd(self, dim, n):
        sp_, rng = make_problem(dim=dim, n=n, seed=10 + dim)
        u, alpha = random_feasible(sp_, rng)
        x = sp_.join(u, alpha)
        hess = sp_.reduce_matrix(sp_.evaluate(u, alpha, want_hess=True).hessian)
        h = 1e-6
        for _ in range(5):
            d = rng.standard_normal(len(x))
            d /= np.linalg.norm(d)
            gp = sp_.reduce_vector(
                sp_.evaluate(*sp_.split(x + h * d), check_box=False).gradient
            )
            gm = sp_.reduce_vector(
                sp_.evaluate(*sp_.split(x - h * d), check_box=False).gradient
            )
            fd = (gp - gm) / (2 * h)
            hv = hess @ d
            scale = max(1.0, np.max(np.abs(hv)))
            assert np.max(np.abs(hv - fd)) < 1e-5 * scale

    def test_hessian_exactly_symmetric(self):
        sp_, rng = make_problem(dim=2, n=3)
        u, alpha = random_feasible(sp_, rng)
        hess = potential_hessian(sp_, u, alpha)
        assert (hess - hess.T).nnz == 0 or np.max(np.abs((hess - hess.T).data)) == 0.0

    def test_coupling_vanishes_at_pristine_floor(self):
        # the degradation law has gamma'(0) = 0, so at alpha = 0 the
        # displacement-damage coupling block is exactly zero
        sp_, rng = make_problem()
        u, _ = random_feasible(sp_, rng)
        hess = potential_hessian(sp_, u, np.zeros(sp_.n_a))
        block = hess[: sp_.n_u, sp_.n_u:]
        assert np.max(np.abs(block.toarray())) == 0.0

    def test_u_block_minimizer_has_zero_gradient(self):
        sp_, rng = make_problem(dirichlet=False)
        _, alpha = random_feasible(sp_, rng)
        n_u = sp_.n_u
        g0 = sp_.evaluate(np.zeros(n_u), alpha).gradient[:n_u]
        g1 = np.zeros((n_u, n_u))
        for j in range(n_u):
            e = np.zeros(n_u)
            e[j] = 1.0
            g1[:, j] = sp_.evaluate(e, alpha).gradient[:n_u] - g0
        u_star = np.linalg.solve(g1, -g0)
        g = sp_.evaluate(u_star, alpha).gradient[:n_u]
        assert np.max(np.abs(g)) < 1e-10 * max(1.0, np.max(np.abs(g0)))


# ---------------------------------------------------------------------------
# convexity
# ---------------------------------------------------------------------------


class TestConvexity:
    def test_hessian_positive_below_threshold(self):
        sp0, rng = make_problem(n=8, loads=False)
        tau0 = critical_timestep(sp0.material)
        sp_ = build_step_problem(
            sp0.geom, sp0.material, sp0.prev, tau0 / 2.0
        )
        for _ in range(5):
            u, alpha = random_feasible(sp_, rng)
            hess = sp_.reduce_matrix(
                sp_.evaluate(u, alpha, want_hess=True).hessian
            ).toarray()
            assert np.linalg.eigvalsh(hess)[0] > 0.0

    def test_hessian_psd_at_threshold(self):
        sp0, rng = make_problem(n=8, loads=False)
        tau0 = critical_timestep(sp0.material)
        sp_ = build_step_problem(sp0.geom, sp0.material, sp0.prev, tau0)
        for _ in range(5):
            u, alpha = random_feasible(sp_, rng)
            hess = sp_.reduce_matrix(
                sp_.evaluate(u, alpha, want_hess=True).hessian
            ).toarray()
            scale = np.max(np.abs(hess))
            assert np.linalg.eigvalsh(hess)[0] > -1e-10 * scale


# ---------------------------------------------------------------------------
# scheme equivalence and modes
# ---------------------------------------------------------------------------


class TestSchemeIdentity:
    @pytest.mark.parametrize("dim", [1, 2])
    def test_u_gradient_is_momentum_residual(self, dim):
        # with v from the midpoint update, the independently combined
        # momentum balance coincides with the u-gradient of the potential
        # at every state, not only at minimizers
        sp_, rng = make_problem(dim=dim, n=4, seed=20 + dim)
        for _ in range(3):
            u, alpha = random_feasible(sp_, rng)
            v_new = 2.0 * (u - sp_.prev.u) / sp_.tau - sp_.prev.v
            weak = weak_momentum_residual(sp_, u, alpha, v_new)
            g_u = sp_.evaluate(u, alpha).gradient[: sp_.n_u]
            scale = max(1.0, np.max(np.abs(g_u)))
            assert np.max(np.abs(weak - g_u)) < 1e-12 * scale


class TestQuasistatic:
    def test_requires_dirichlet(self):
        with pytest.raises(BadSpecError):
            make_problem(rho=0.0, dirichlet=False)

    def test_no_inertia(self):
        sp_, rng = make_problem(rho=0.0, dirichlet=True)
        assert sp_.mass is None
        u, alpha = random_feasible(sp_, rng)
        assert sp_.evaluate(u, alpha).terms["inertia"] == 0.0


class TestDifferenceQuotientMode:
    def nonconcave_energy(self):
        return CustomDamageEnergy(
            fun=lambda a: -((1 - a) ** 2) + 0.6 * (1 - a) ** 3,
            dfun=lambda a: 2 * (1 - a) - 1.8 * (1 - a) ** 2,
            d2fun=lambda a: -2 + 3.6 * (1 - a),
            allow_nonconcave=True,
        )

    def test_enabled_automatically(self):
        sp_, _ = make_problem(damage_energy=self.nonconcave_energy())
        assert sp_.dq_phi
        sp_, _ = make_problem()
        assert not sp_.dq_phi

    def test_quotient_residual_single_element(self):
        mesh = build_interval_mesh(2.0, 1)
        geom = element_geometry(mesh)
        de = self.nonconcave_energy()
        mat = make_material(1, damage_energy=de)
        prev = State(k=0, t=0.0, u=[0.0, 0.1], v=[0.0, 0.0], alpha=[1.0, 0.8])
        tau = 0.05
        on = build_step_problem(geom, mat, prev, tau)
        off = build_step_problem(geom, mat, prev, tau, dq_phi=False)
        u = np.array([0.0, 0.1])
        alpha = np.array([0.7, 0.5])
        diff = (
            on.evaluate(u, alpha).gradient[geom.n_u:]
            - off.evaluate(u, alpha).gradient[geom.n_u:]
        )
        xi = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
        shape = np.column_stack([1 - xi, xi])
        a_q = shape @ alpha
        a0_q = shape @ prev.alpha
        quot = (de.value(a_q) - de.value(a0_q)) / (a_q - a0_q)
        # gradient of the -phi term swaps phi'(a_q) for the quotient
        hand = 2.0 * 0.5 * shape.T @ (de.deriv(a_q) - quot)
        assert_allclose(diff, hand, rtol=1e-12)

    def test_falls_back_at_unchanged_damage(self):
        sp_, rng = make_problem(damage_energy=self.nonconcave_energy())
        u, _ = random_feasible(sp_, rng)
        g_on = sp_.evaluate(u, sp_.prev.alpha).gradient
        off = build_step_problem(
            sp_.geom, sp_.material, sp_.prev, sp_.tau,
            f_avg=sp_.f_avg, dq_phi=False,
        )
        u2 = u.copy()
        u2[sp_.diri_dofs] = sp_.diri_vals
        g_off = off.evaluate(u2, sp_.prev.alpha).gradient
        assert_allclose(
            g_on[sp_.n_u:], g_off[sp_.n_u:], rtol=0,
            atol=1e-14 * max(1.0, np.max(np.abs(g_off)))
        )


class TestStartPoint:
    def test_start_feasible(self):
        sp_, _ = make_problem()
        u, alpha = sp_.start_point()
        sp_.check_feasible(alpha)
        assert_allclose(u[sp_.diri_dofs], sp_.diri_vals)
        assert potential_gradient(sp_, u, alpha).shape == (sp_.n_u + sp_.n_a,)
