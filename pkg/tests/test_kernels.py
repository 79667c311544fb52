"""Parity between the numpy and compiled element kernel backends."""

import os
import subprocess
import sys

import numpy as np
import pytest

from kvdamage._kernels import python as py_impl
from kvdamage.assembly import element_geometry
from kvdamage.mesh import build_interval_mesh, build_rectangle_mesh

from helpers import make_material

c_impl = pytest.importorskip(
    "kvdamage._kernels._core",
    reason="compiled kernels not built",
)

FLAG_SETS = [
    (True, False, False),
    (True, True, False),
    (True, True, True),
    (False, True, False),
    (False, False, True),
]


def _setup(dim, seed):
    if dim == 1:
        mesh = build_interval_mesh(1.3, 9)
    else:
        mesh = build_rectangle_mesh(1.0, 0.8, 4, 3)
    geom = element_geometry(mesh)
    mat = make_material(dim)
    rng = np.random.default_rng(seed)
    u = 0.3 * rng.standard_normal(mesh.n_nodes * dim)
    alpha = rng.uniform(0.05, 1.0, mesh.n_nodes)
    return geom, mat, u, alpha


def _compare(ref, got, label):
    assert len(ref) == len(got)
    for i, (a, b) in enumerate(zip(ref, got)):
        slot = f"{label}[{i}]"
        if a is None:
            assert b is None, slot
        elif np.isscalar(a):
            assert b == pytest.approx(a, rel=1e-12, abs=1e-300), slot
        else:
            np.testing.assert_allclose(
                b, a, rtol=1e-12, atol=1e-13 * max(1.0, np.abs(a).max()),
                err_msg=slot,
            )


@pytest.mark.parametrize("dim", [1, 2])
@pytest.mark.parametrize("flags", FLAG_SETS)
def test_elastic_terms_parity(dim, flags):
    geom, mat, u, alpha = _setup(dim, seed=3 * dim)
    want_value, want_grad, want_hess = flags
    law = mat.degradation
    cmat = mat.elastic.matrix
    a_q = geom.alpha_at_quad(alpha)
    need_d1 = want_grad or want_hess
    args = (
        geom.bmat, geom.btcb(cmat), geom.vols, geom.quad_w, geom.quad_n,
        cmat, u[geom.u_dofs], law.value(a_q),
        law.deriv(a_q) if need_d1 else None,
        law.second_deriv(a_q) if want_hess else None,
        want_value, want_grad, want_hess,
    )
    _compare(py_impl.elastic_terms(*args), c_impl.elastic_terms(*args),
             "elastic")


@pytest.mark.parametrize("dim", [1, 2])
@pytest.mark.parametrize("p,eps_g", [(2.0, 0.0), (3.5, 0.0), (3.5, 0.4)])
@pytest.mark.parametrize("flags", FLAG_SETS)
def test_plap_terms_parity(dim, p, eps_g, flags):
    geom, _, _, alpha = _setup(dim, seed=11 * dim)
    args = (
        geom.gmat, geom.vols, alpha[geom.conn], 0.7, p, eps_g, 1e-8, *flags,
    )
    _compare(py_impl.plap_terms(*args), c_impl.plap_terms(*args), "plap")


@pytest.mark.parametrize("dim", [1, 2])
@pytest.mark.parametrize("flags", FLAG_SETS)
def test_scalar_field_terms_parity(dim, flags):
    geom, mat, _, alpha = _setup(dim, seed=17 * dim)
    want_value, want_grad, want_hess = flags
    a_q = geom.alpha_at_quad(alpha)
    args = (
        geom.vols, geom.quad_w, geom.quad_n,
        np.cos(a_q) if want_value else None,
        -np.sin(a_q) if (want_grad or want_hess) else None,
        -np.cos(a_q) if want_hess else None,
        want_value, want_grad, want_hess,
    )
    _compare(py_impl.scalar_field_terms(*args),
             c_impl.scalar_field_terms(*args), "scalar")


def test_compiled_rejects_oversized_blocks():
    geom, mat, u, alpha = _setup(2, seed=5)
    cmat = mat.elastic.matrix
    law = mat.degradation
    a_q = geom.alpha_at_quad(alpha)
    bad_b = np.zeros((geom.bmat.shape[0], 4, 8))
    with pytest.raises(ValueError):
        c_impl.elastic_terms(
            bad_b, geom.btcb(cmat), geom.vols, geom.quad_w, geom.quad_n,
            cmat, np.zeros((geom.bmat.shape[0], 8)), law.value(a_q),
            None, None, True, False, False,
        )


# ---------------------------------------------------------------------------
# backend dispatch
# ---------------------------------------------------------------------------


def _backend_in_subprocess(env_value):
    env = dict(os.environ)
    if env_value is None:
        env.pop("KVDAMAGE_KERNELS", None)
    else:
        env["KVDAMAGE_KERNELS"] = env_value
    return subprocess.run(
        [sys.executable, "-c",
         "from kvdamage._kernels import BACKEND; print(BACKEND)"],
        capture_output=True, text=True, env=env,
    )


def test_env_var_routes_backend():
    assert _backend_in_subprocess("python").stdout.strip() == "python"
    assert _backend_in_subprocess("compiled").stdout.strip() == "compiled"
    assert _backend_in_subprocess(None).stdout.strip() == "compiled"


def test_env_var_rejects_unknown_backend():
    proc = _backend_in_subprocess("fortran")
    assert proc.returncode != 0
    assert "KVDAMAGE_KERNELS" in proc.stderr


def test_backends_agree_on_a_full_run():
    script = (
        "from kvdamage.scenarios import parse_scenario, run_scenario\n"
        "import test_scenarios\n"
        "run = run_scenario(parse_scenario(test_scenarios.MINIMAL))\n"
        "print(repr(float(run.report.total[-1])), repr(float(run.trajectory."
        "states[-1].alpha.min())))\n"
    )
    outs = {}
    for backend in ("python", "compiled"):
        env = dict(os.environ, KVDAMAGE_KERNELS=backend)
        env["PYTHONPATH"] = os.path.dirname(__file__)
        proc = subprocess.run(
            [sys.executable, "-c", script],
            capture_output=True, text=True, env=env,
        )
        assert proc.returncode == 0, proc.stderr
        outs[backend] = [float(tok) for tok in proc.stdout.split()]
    energy_py, alpha_py = outs["python"]
    energy_c, alpha_c = outs["compiled"]
    assert energy_c == pytest.approx(energy_py, rel=1e-10)
    assert alpha_c == pytest.approx(alpha_py, rel=0, abs=1e-10)
