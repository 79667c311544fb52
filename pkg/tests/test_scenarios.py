"""Scenario parsing, validation, builtins and the run driver."""

import numpy as np
import pytest

from kvdamage.errors import (
    ScenarioParseError,
    ScenarioValidationError,
    UnknownScenarioError,
)
from kvdamage.scenarios import (
    BUILTIN_NAMES,
    adjust_tau,
    builtin_scenario,
    parse_scenario,
    run_scenario,
    scenario_tau0,
    serialize_scenario,
)

MINIMAL = """
[scenario]
t_end = 0.1
tau = 0.05

[mesh]
kind = interval
length = 1.0
nx = 6

[material]
rho = 1.3
elastic.lambda = 0.0
elastic.mu = 1.0
viscosity.D0_scale = 0.5
viscosity.chi_R = 0.25
damage.Gc = 1.5
degradation.eps0 = 0.2
dissipation.eta = 0.7
gradient.kappa = 0.3

[dirichlet]
left.0 = 0.0

[tractions]
right.0 = ramp 3.0
"""


# ---------------------------------------------------------------------------
# parsing and canonical form
# ---------------------------------------------------------------------------


def test_minimal_scenario_parses():
    sc = parse_scenario(MINIMAL)
    assert sc.t_end == 0.1
    assert sc.tau == 0.05
    assert sc.n_steps == 2
    assert sc.dim == 1
    assert not sc.freeze_damage
    assert sc.warnings == []


def test_round_trip_is_idempotent():
    sc1 = parse_scenario(MINIMAL)
    text1 = serialize_scenario(sc1)
    sc2 = parse_scenario(text1)
    assert sc2.raw == sc1.raw
    assert serialize_scenario(sc2) == text1


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_builtin_round_trip(name):
    sc1 = builtin_scenario(name)
    assert sc1.name == name
    sc2 = parse_scenario(serialize_scenario(sc1))
    assert sc2.raw == sc1.raw
    assert serialize_scenario(sc2) == serialize_scenario(sc1)


def test_programs_are_canonicalized():
    text = MINIMAL.replace("ramp 3.0", "ramp  3").replace("tau = 0.05",
                                                          "tau = 5e-2")
    sc = parse_scenario(text)
    assert sc.raw["tractions"]["right.0"] == "ramp 3.0"
    assert sc.raw["scenario"]["tau"] == "0.05"


def test_inline_comments_are_stripped():
    text = MINIMAL.replace("tau = 0.05", "tau = 0.05   ; snapped to t_end")
    text = text.replace("right.0 = ramp 3.0", "right.0 = ramp 3.0  # pull")
    sc = parse_scenario(text)
    assert sc.tau == 0.05
    assert sc.raw["tractions"]["right.0"] == "ramp 3.0"


def test_unknown_builtin_rejected():
    with pytest.raises(UnknownScenarioError, match="bar1d"):
        builtin_scenario("does_not_exist")


def test_syntax_error_reports_line():
    bad = "[scenario]\nt_end 0.1\n"
    with pytest.raises(ScenarioParseError):
        parse_scenario(bad)
    bad2 = "t_end = 0.1\n"
    with pytest.raises(ScenarioParseError):
        parse_scenario(bad2)


# ---------------------------------------------------------------------------
# validation: everything wrong is reported, together
# ---------------------------------------------------------------------------


def test_unknown_keys_are_all_listed():
    text = MINIMAL.replace(
        "[material]\nrho",
        "[material]\nwhatever = 2\nbogus.key = 1\nrho",
        1,
    )
    text += "\n[conjuring]\nspell = 3\n"
    with pytest.raises(ScenarioValidationError) as err:
        parse_scenario(text)
    msg = str(err.value)
    assert "material.whatever" in msg
    assert "material.bogus.key" in msg
    assert "unknown section [conjuring]" in msg
    assert len(err.value.problems) == 3


def test_missing_required_keys_listed():
    text = MINIMAL.replace("t_end = 0.1\n", "").replace(
        "damage.Gc = 1.5\n", ""
    )
    with pytest.raises(ScenarioValidationError) as err:
        parse_scenario(text)
    msg = str(err.value)
    assert "scenario.t_end" in msg
    assert "material.damage.Gc" in msg


def test_value_violations_collected():
    text = (
        MINIMAL
        .replace("damage.Gc = 1.5", "damage.Gc = -1.0")
        .replace("tau = 0.05", "tau = 0.0")
        .replace("kind = interval", "kind = triangle")
        .replace("right.0 = ramp 3.0", "back.7 = warp 3.0")
    )
    with pytest.raises(ScenarioValidationError) as err:
        parse_scenario(text)
    msg = str(err.value)
    assert "damage.Gc" in msg
    assert "scenario.tau" in msg
    assert "mesh.kind" in msg
    assert "tractions.back.7" in msg
    assert len(err.value.problems) >= 4


def test_quasistatic_requires_support():
    text = MINIMAL.replace("rho = 1.3", "rho = 0.0")
    text = text.replace("[dirichlet]\nleft.0 = 0.0\n", "")
    with pytest.raises(ScenarioValidationError, match="rigid"):
        parse_scenario(text)


def test_seam_needs_rectangle():
    text = MINIMAL + "\n[initial]\nseam_alpha = 0.5\n"
    with pytest.raises(ScenarioValidationError) as err:
        parse_scenario(text)
    assert any("seam" in p for p in err.value.problems)
    assert any("seam_y" in p for p in err.value.problems)


def test_interval_rejects_rectangle_keys():
    text = MINIMAL.replace("nx = 6", "nx = 6\nny = 4")
    with pytest.raises(ScenarioValidationError, match="mesh.ny"):
        parse_scenario(text)


def test_bad_solver_options():
    text = MINIMAL + "\n[solver]\nmode = sideways\narmijo = 2.0\n"
    with pytest.raises(ScenarioValidationError) as err:
        parse_scenario(text)
    assert any("solver.mode" in p for p in err.value.problems)
    assert any("armijo" in p for p in err.value.problems)


# ---------------------------------------------------------------------------
# time step adjustment
# ---------------------------------------------------------------------------


def test_adjust_tau_ceiling_rule():
    tau, n, adjusted = adjust_tau(1.0, 0.3)
    assert (tau, n, adjusted) == (0.25, 4, True)
    tau, n, adjusted = adjust_tau(1.0, 0.25)
    assert (tau, n, adjusted) == (0.25, 4, False)
    tau, n, adjusted = adjust_tau(1.0, 2.0)
    assert (tau, n) == (1.0, 1)


def test_tau_adjustment_recorded_in_warnings():
    text = MINIMAL.replace("tau = 0.05", "tau = 0.04")
    sc = parse_scenario(text)
    assert sc.tau == 0.1 / 3
    assert sc.n_steps == 3
    assert len(sc.warnings) == 1
    assert "adjusted" in sc.warnings[0]


# ---------------------------------------------------------------------------
# building and running
# ---------------------------------------------------------------------------


def test_bar1d_build():
    sc = builtin_scenario("bar1d")
    setup = sc.build()
    assert setup.mesh.n_nodes == 101
    assert setup.material.rho == 1.3
    assert "right" in setup.loads.tractions
    assert np.all(setup.initial.alpha == 1.0)
    assert scenario_tau0(sc) == 0.25
    assert sc.tau == 0.05
    assert sc.n_steps >= 10


def test_notched_plate_build():
    sc = builtin_scenario("notched_plate2d")
    setup = sc.build()
    seam = setup.initial.alpha < 1.0
    assert seam.sum() > 0
    np.testing.assert_allclose(setup.initial.alpha[seam], 0.15625)
    nodes = setup.mesh.nodes
    assert np.all(nodes[seam, 0] <= 0.3 + 1e-12)
    assert np.all(np.abs(nodes[seam, 1] - 0.5) <= 0.55 / 32 + 1e-12)
    np.testing.assert_allclose(scenario_tau0(sc), 0.0125, rtol=1e-12)
    assert setup.material.dissipation.eta == 0.0


def test_oscillator_build():
    sc = builtin_scenario("oscillator_frozen")
    assert sc.freeze_damage
    setup = sc.build()
    assert setup.material.viscosity.D0 is None
    assert scenario_tau0(sc) is None
    x = setup.mesh.nodes[:, 0]
    np.testing.assert_allclose(setup.initial.v, x, rtol=1e-15)


def test_quasistatic_build():
    sc = builtin_scenario("quasistatic_bar")
    setup = sc.build()
    assert setup.material.quasistatic


def test_run_scenario_minimal():
    run = run_scenario(parse_scenario(MINIMAL))
    assert run.trajectory.n_steps == 2
    assert run.tau == 0.05
    assert len(run.stats) == 2
    assert run.report.ineq_margin is not None
    assert run.tau0 == 0.25


def test_run_scenario_tau_override():
    run = run_scenario(parse_scenario(MINIMAL), tau=0.03)
    assert run.trajectory.n_steps == 4
    assert run.tau == pytest.approx(0.025)
    assert any("adjusted" in w for w in run.warnings)


def test_strict_tau0_refuses_large_steps():
    text = MINIMAL.replace("t_end = 0.1", "t_end = 1.0")
    with pytest.raises(ScenarioValidationError, match="exceeds"):
        run_scenario(parse_scenario(text), tau=0.5, strict_tau0=True)
    run = run_scenario(parse_scenario(MINIMAL), strict_tau0=True)
    assert run.trajectory.n_steps == 2


def test_strict_tau0_needs_a_threshold():
    text = MINIMAL.replace("viscosity.D0_scale = 0.5",
                           "viscosity.D0_scale = none")
    with pytest.raises(ScenarioValidationError, match="threshold"):
        run_scenario(parse_scenario(text), strict_tau0=True)


def test_solver_section_flows_into_config():
    text = MINIMAL + (
        "\n[solver]\ngrad_tol = 1e-7\nmax_newton = 33\nmode = staggered\n"
    )
    sc = parse_scenario(text)
    cfg = sc.solver_config()
    assert cfg.grad_tol == 1e-7
    assert cfg.max_newton == 33
    assert cfg.mode == "staggered"


def test_body_load_round_trip_and_build():
    text = MINIMAL + "\n[body]\n0 = ramp 0.5\n"
    sc = parse_scenario(text)
    assert sc.raw["body"]["0"] == "ramp 0.5"
    setup = sc.build()
    vals = setup.loads.body(2.0, np.zeros((3, 1)))
    np.testing.assert_allclose(vals, 1.0)
    sc2 = parse_scenario(serialize_scenario(sc))
    assert sc2.raw == sc.raw
