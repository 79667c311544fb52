"""Shared builders for solver and integrator tests."""

import numpy as np

from kvdamage.assembly import LoadSpec, element_geometry
from kvdamage.materials import (
    ATDegradation,
    ATQuadraticDamage,
    DissipationLaw,
    ElasticTensor,
    GradientTerm,
    MaterialParams,
    ViscosityModel,
)
from kvdamage.mesh import DofMap, build_interval_mesh, build_rectangle_mesh
from kvdamage.step_problem import State, build_step_problem


def make_material(dim, d0_scale=0.5, chi_r=0.25, eta=0.7, rho=1.3, p=2.0,
                  gc=1.5, eps=0.2, kappa=0.3, eps_ratio=0.1,
                  damage_energy=None):
    elastic = ElasticTensor.isotropic(0.0 if dim == 1 else 1.0, 1.0, dim)
    return MaterialParams(
        degradation=ATDegradation(eps_ratio),
        elastic=elastic,
        viscosity=ViscosityModel(
            elastic.scaled(d0_scale) if d0_scale else None, chi_r
        ),
        damage_energy=damage_energy or ATQuadraticDamage(gc, eps),
        gradient=GradientTerm(kappa, p),
        rho=rho,
        dissipation=DissipationLaw(eta, allow_zero=(eta == 0.0)),
    )


def make_problem(dim=1, n=10, tau=0.02, pull=1.5, dirichlet=True, seed=0,
                 t_prev=0.0, **matkw):
    """A loaded step problem: fixed at one side, pulled at the other."""
    if dim == 1:
        mesh = build_interval_mesh(1.0, n)
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
            dm.constrain("bottom", 1, 0.0)
    vec = np.zeros(dim)
    vec[-1] = 1.0
    loads = LoadSpec(
        tractions={
            ("right" if dim == 1 else "top"): (
                lambda t, x: pull * np.tile(vec, (len(x), 1))
            )
        }
    ) if pull else LoadSpec()
    rng = np.random.default_rng(seed)
    prev = State(
        k=0,
        t=t_prev,
        u=np.zeros(geom.n_u),
        v=np.zeros(geom.n_u),
        alpha=np.ones(geom.n_a),
    )
    sp_ = build_step_problem(geom, mat, prev, tau, loads=loads, dofmap=dm)
    return sp_, rng


def random_feasible(sp_, rng, spread=0.1):
    u = sp_.prev.u + spread * rng.standard_normal(sp_.n_u)
    u[sp_.diri_dofs] = sp_.diri_vals
    alpha = rng.uniform(0.3, 0.95, sp_.n_a) * sp_.box_upper
    return u, alpha
