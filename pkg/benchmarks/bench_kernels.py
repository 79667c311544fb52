"""Timing comparison of the element kernel backends.

Runs the three hot kernels (degraded elastic terms, damage gradient
terms, pointwise scalar integrands) on 2D triangle meshes of increasing
size with full derivative output, the workload of one Newton iteration,
and reports the per-call time of the numpy backend against the compiled
one.  Usage:

    python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from kvdamage._kernels import python as py_impl
from kvdamage.assembly import element_geometry
from kvdamage.materials import (
    ATDegradation,
    ATQuadraticDamage,
    ElasticTensor,
    GradientTerm,
    MaterialParams,
    ViscosityModel,
)
from kvdamage.mesh import build_rectangle_mesh

try:
    from kvdamage._kernels import _core as c_impl
except ImportError:
    c_impl = None


def make_workload(nx):
    mesh = build_rectangle_mesh(1.0, 1.0, nx, nx)
    geom = element_geometry(mesh)
    elastic = ElasticTensor.isotropic(1.0, 1.0, 2)
    mat = MaterialParams(
        degradation=ATDegradation(0.1),
        elastic=elastic,
        viscosity=ViscosityModel(elastic.scaled(0.1)),
        damage_energy=ATQuadraticDamage(1.5, 0.2),
        gradient=GradientTerm(0.3, 2.0),
    )
    rng = np.random.default_rng(0)
    n = mesh.n_nodes
    u = 0.1 * rng.standard_normal(2 * n)
    alpha = rng.uniform(0.2, 1.0, n)

    law = mat.degradation
    cmat = mat.elastic.matrix
    a_q = geom.alpha_at_quad(alpha)
    elastic_args = (
        geom.bmat, geom.btcb(cmat), geom.vols, geom.quad_w, geom.quad_n,
        cmat, u[geom.u_dofs], law.value(a_q), law.deriv(a_q),
        law.second_deriv(a_q), True, True, True,
    )
    plap_args = (
        geom.gmat, geom.vols, alpha[geom.conn], 0.3, 2.0, 0.0, 1e-8,
        True, True, True,
    )
    scalar_args = (
        geom.vols, geom.quad_w, geom.quad_n,
        np.cos(a_q), -np.sin(a_q), -np.cos(a_q), True, True, True,
    )
    n_e = geom.vols.shape[0]
    return n_e, (elastic_args, plap_args, scalar_args)


def time_backend(impl, args_triple, repeats):
    fns = (impl.elastic_terms, impl.plap_terms, impl.scalar_field_terms)
    for fn, args in zip(fns, args_triple):
        fn(*args)  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for fn, args in zip(fns, args_triple):
            fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    if c_impl is None:
        print("compiled backend not built; timing the numpy backend only")

    print(f"{'elements':>10} {'numpy [ms]':>12} {'compiled [ms]':>14} "
          f"{'speedup':>8}")
    for nx in (16, 32, 64, 128):
        n_e, triple = make_workload(nx)
        t_py = time_backend(py_impl, triple, args.repeats)
        if c_impl is not None:
            t_c = time_backend(c_impl, triple, args.repeats)
            print(f"{n_e:>10} {1e3 * t_py:>12.3f} {1e3 * t_c:>14.3f} "
                  f"{t_py / t_c:>8.2f}")
        else:
            print(f"{n_e:>10} {1e3 * t_py:>12.3f} {'-':>14} {'-':>8}")


if __name__ == "__main__":
    main()
