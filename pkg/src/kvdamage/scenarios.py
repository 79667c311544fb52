"""Scenario files: parsing, validation, builtins and the run driver.

A scenario is an INI file describing one simulation: mesh, material,
supports, loads, initial fields, time grid and solver options.  Parsing
is strict: every key is checked against the documented set and all
violations are reported together.  The canonical form produced by
serialize_scenario round-trips through parse_scenario unchanged.

Time dependent values use a two-word grammar: a bare number is constant
in time, "ramp R" is R * t.  Loads and supports are given per boundary
tag and component as "<tag>.<comp> = <program>"; unspecified traction
components are zero.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import ElementGeometry, LoadSpec, element_geometry
from .errors import (
    KVDamageError,
    NotPositiveDefiniteError,
    ScenarioParseError,
    ScenarioValidationError,
    UnknownScenarioError,
)
from .materials import (
    ATDegradation,
    ATQuadraticDamage,
    DissipationLaw,
    ElasticTensor,
    GradientTerm,
    MaterialParams,
    QuadraticDegradation,
    ViscosityModel,
    critical_timestep,
)
from .mesh import DofMap, build_interval_mesh, build_rectangle_mesh
from .solver import SolverConfig
from .step_problem import State


# ---------------------------------------------------------------------------
# key registry and small value grammars
# ---------------------------------------------------------------------------

_SECTION_ORDER = (
    "scenario", "mesh", "material", "solver",
    "dirichlet", "tractions", "body", "initial",
)

_KEY_ORDER = {
    "scenario": ("name", "t_end", "tau", "freeze_damage", "output_every"),
    "mesh": ("kind", "length", "height", "nx", "ny"),
    "material": (
        "rho", "degradation.kind", "degradation.eps", "degradation.eps0",
        "elastic.lambda", "elastic.mu",
        "viscosity.D0_scale", "viscosity.chi_R",
        "damage.Gc", "dissipation.eta",
        "gradient.kappa", "gradient.p", "gradient.eps_g",
    ),
    "solver": ("grad_tol", "max_newton", "armijo", "mode", "max_sweeps"),
    "initial": (
        "seam_alpha", "seam_y", "seam_x_max", "seam_halfwidth",
        "v_uniform", "v_linear_x",
    ),
}

_REQUIRED = {
    "scenario": ("t_end", "tau"),
    "mesh": ("kind", "length", "nx"),
    "material": (
        "elastic.lambda", "elastic.mu", "damage.Gc", "degradation.eps0",
        "gradient.kappa",
    ),
}

_TAGS = {"interval": ("left", "right"),
         "rectangle": ("left", "right", "bottom", "top")}

TAU_DIVISOR_TOL = 1e-9


def _parse_program(text):
    """A time program: ("const", v) or ("ramp", rate)."""
    toks = text.split()
    if len(toks) == 1:
        return ("const", float(toks[0]))
    if len(toks) == 2 and toks[0] == "ramp":
        return ("ramp", float(toks[1]))
    raise ValueError(f"bad time program {text!r} (use a number or 'ramp R')")


def _format_program(prog):
    kind, v = prog
    return repr(v) if kind == "const" else f"ramp {v!r}"


def _program_fn(prog):
    kind, v = prog
    if kind == "const":
        return lambda t: v
    return lambda t: v * t


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"bad boolean {text!r}")


def adjust_tau(t_end, tau):
    """Snap tau to the nearest value that divides t_end into whole steps.

    Steps are counted with a ceiling rule, so the adjusted step is never
    larger than requested beyond roundoff.  Returns (tau, n_steps,
    adjusted_flag).
    """
    n = max(1, int(math.ceil(t_end / tau - TAU_DIVISOR_TOL)))
    snapped = t_end / n
    return snapped, n, abs(snapped - tau) > 1e-12 * tau


# ---------------------------------------------------------------------------
# scenario object
# ---------------------------------------------------------------------------


@dataclass
class RunSetup:
    """Everything the time loop needs, built from one scenario."""

    mesh: object
    geom: ElementGeometry
    material: MaterialParams
    dofmap: DofMap
    loads: LoadSpec
    initial: State
    cfg: SolverConfig


@dataclass
class Scenario:
    """Validated scenario with its canonical raw form.

    raw maps section name to an ordered {key: canonical value string}
    dict; it serializes losslessly.  tau and n_steps already honor the
    whole-number-of-steps adjustment, recorded in warnings when it moved
    the requested value.
    """

    name: str
    raw: dict
    t_end: float
    tau: float
    n_steps: int
    freeze_damage: bool
    output_every: int
    warnings: list = field(default_factory=list)

    @property
    def dim(self):
        return 1 if self.raw["mesh"]["kind"] == "interval" else 2

    # -- construction of runnable pieces ------------------------------------

    def material(self) -> MaterialParams:
        m = self.raw["material"]
        dim = self.dim
        lam = float(m["elastic.lambda"])
        mu = float(m["elastic.mu"])
        elastic = ElasticTensor.isotropic(lam, mu, dim)
        kind = m.get("degradation.kind", "at")
        eps = float(m.get("degradation.eps", "0.1"))
        if kind == "at":
            law = ATDegradation(eps)
        else:
            law = QuadraticDegradation(eps)
        d0_text = m.get("viscosity.D0_scale", "none")
        d0 = None if d0_text == "none" else elastic.scaled(float(d0_text))
        chi = float(m.get("viscosity.chi_R", "0.0"))
        eta_text = m.get("dissipation.eta", "default")
        if eta_text == "default":
            dissipation = None
        else:
            eta = float(eta_text)
            dissipation = DissipationLaw(eta, allow_zero=(eta == 0.0))
        return MaterialParams(
            degradation=law,
            elastic=elastic,
            viscosity=ViscosityModel(d0, chi),
            damage_energy=ATQuadraticDamage(
                float(m["damage.Gc"]), float(m["degradation.eps0"])
            ),
            gradient=GradientTerm(
                float(m["gradient.kappa"]),
                float(m.get("gradient.p", "2.0")),
                float(m.get("gradient.eps_g", "0.0")),
            ),
            rho=float(m.get("rho", "1.0")),
            dissipation=dissipation,
        )

    def solver_config(self) -> SolverConfig:
        s = self.raw.get("solver", {})
        kw = {}
        if "grad_tol" in s:
            kw["grad_tol"] = float(s["grad_tol"])
        if "max_newton" in s:
            kw["max_newton"] = int(s["max_newton"])
        if "armijo" in s:
            kw["armijo"] = float(s["armijo"])
        if "mode" in s:
            kw["mode"] = s["mode"]
        if "max_sweeps" in s:
            kw["max_sweeps"] = int(s["max_sweeps"])
        return SolverConfig(**kw)

    def build(self) -> RunSetup:
        msec = self.raw["mesh"]
        nx = int(msec["nx"])
        length = float(msec["length"])
        if msec["kind"] == "interval":
            mesh = build_interval_mesh(length, nx)
        else:
            mesh = build_rectangle_mesh(
                length, float(msec["height"]), nx, int(msec["ny"])
            )
        geom = element_geometry(mesh)
        material = self.material()
        dim = self.dim

        dofmap = DofMap(mesh)
        for key, text in self.raw.get("dirichlet", {}).items():
            tag, comp = key.rsplit(".", 1)
            prog = _parse_program(text)
            if prog[0] == "const":
                dofmap.constrain(tag, int(comp), prog[1])
            else:
                dofmap.constrain(tag, int(comp), _program_fn(prog))

        tractions = {}
        by_tag: dict = {}
        for key, text in self.raw.get("tractions", {}).items():
            tag, comp = key.rsplit(".", 1)
            by_tag.setdefault(tag, {})[int(comp)] = _parse_program(text)
        for tag, progs in by_tag.items():
            def make(progs=progs):
                def fn(t, x):
                    out = np.zeros((len(x), dim))
                    for c, prog in progs.items():
                        out[:, c] = _program_fn(prog)(t)
                    return out
                return fn
            tractions[tag] = make()

        body = None
        if "body" in self.raw:
            progs = {
                int(c): _parse_program(text)
                for c, text in self.raw["body"].items()
            }
            def body(t, x, progs=progs):
                out = np.zeros((len(x), dim))
                for c, prog in progs.items():
                    out[:, c] = _program_fn(prog)(t)
                return out
        loads = LoadSpec(body=body, tractions=tractions)

        init = self.raw.get("initial", {})
        alpha0 = np.ones(mesh.n_nodes)
        if "seam_alpha" in init:
            y0 = float(init["seam_y"])
            x_max = float(init["seam_x_max"])
            height = float(msec["height"])
            half = float(init.get(
                "seam_halfwidth", repr(0.55 * height / int(msec["ny"]))
            ))
            nodes = mesh.nodes
            inside = (np.abs(nodes[:, 1] - y0) <= half) & (nodes[:, 0] <= x_max)
            alpha0[inside] = float(init["seam_alpha"])
        v0 = np.zeros(mesh.n_nodes * dim)
        if "v_uniform" in init:
            v0[:] = float(init["v_uniform"])
        if "v_linear_x" in init:
            rate = float(init["v_linear_x"])
            v0[0::dim] = rate * mesh.nodes[:, 0]
        initial = State(
            k=0, t=0.0, u=np.zeros(mesh.n_nodes * dim), v=v0, alpha=alpha0
        )
        return RunSetup(
            mesh=mesh, geom=geom, material=material, dofmap=dofmap,
            loads=loads, initial=initial, cfg=self.solver_config(),
        )


# ---------------------------------------------------------------------------
# parsing and validation
# ---------------------------------------------------------------------------


def _canonical_float(text, problems, where):
    try:
        v = float(text)
        if not np.isfinite(v):
            raise ValueError
        return repr(v)
    except ValueError:
        problems.append(f"{where}: not a number: {text!r}")
        return None


def _canonical_int(text, problems, where, minimum=1):
    try:
        v = int(text)
    except ValueError:
        problems.append(f"{where}: not an integer: {text!r}")
        return None
    if v < minimum:
        problems.append(f"{where}: must be >= {minimum}, got {v}")
        return None
    return str(v)


def _canonical_program(text, problems, where):
    try:
        return _format_program(_parse_program(text))
    except ValueError as exc:
        problems.append(f"{where}: {exc}")
        return None


def _positive(raw, section, key, problems, strict=True):
    text = raw.get(section, {}).get(key)
    if text is None:
        return
    try:
        v = float(text)
    except ValueError:
        return  # already reported by canonicalization
    if (v <= 0.0) if strict else (v < 0.0):
        bound = ">" if strict else ">="
        problems.append(f"{section}.{key}: must be {bound} 0, got {v:g}")


def parse_scenario(text: str) -> Scenario:
    """Parse and validate one scenario given as INI text.

    Raises ScenarioParseError for syntax, ScenarioValidationError with
    the complete list of problems for anything semantic.
    """
    cp = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=(";", "#")
    )
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        if line is None and getattr(exc, "errors", None):
            line = exc.errors[0][0]
        raise ScenarioParseError(str(exc.message.splitlines()[0]), line)

    problems: list[str] = []
    raw: dict = {}
    for section in cp.sections():
        if section not in _SECTION_ORDER:
            problems.append(f"unknown section [{section}]")
            continue
        raw[section] = dict(cp.items(section))

    for section, keys in _REQUIRED.items():
        if section not in raw:
            problems.append(f"missing section [{section}]")
            continue
        for key in keys:
            if key not in raw[section]:
                problems.append(f"missing required key {section}.{key}")

    # fixed-key sections: reject unknown keys, canonicalize values
    for section in ("scenario", "mesh", "material", "solver", "initial"):
        for key in list(raw.get(section, {})):
            if key not in _KEY_ORDER[section]:
                problems.append(f"unknown key {section}.{key}")
                raw[section].pop(key)

    sc = raw.get("scenario", {})
    name = sc.get("name", "unnamed").strip()
    if "name" in sc:
        sc["name"] = name
    for key in ("t_end", "tau"):
        if key in sc:
            canon = _canonical_float(sc[key], problems, f"scenario.{key}")
            if canon is not None:
                sc[key] = canon
    if "freeze_damage" in sc:
        try:
            sc["freeze_damage"] = (
                "true" if _parse_bool(sc["freeze_damage"]) else "false"
            )
        except ValueError as exc:
            problems.append(f"scenario.freeze_damage: {exc}")
    if "output_every" in sc:
        canon = _canonical_int(sc["output_every"], problems,
                               "scenario.output_every")
        if canon is not None:
            sc["output_every"] = canon
    _positive(raw, "scenario", "t_end", problems)
    _positive(raw, "scenario", "tau", problems)

    mesh = raw.get("mesh", {})
    kind = mesh.get("kind", "")
    if "kind" in mesh and kind not in _TAGS:
        problems.append(
            f"mesh.kind: must be interval or rectangle, got {kind!r}"
        )
        kind = ""
    if kind == "rectangle":
        for key in ("height", "ny"):
            if key not in mesh:
                problems.append(f"missing required key mesh.{key}")
    if kind == "interval":
        for key in ("height", "ny"):
            if key in mesh:
                problems.append(f"mesh.{key}: not allowed for interval meshes")
                mesh.pop(key)
    for key in ("length", "height"):
        if key in mesh:
            canon = _canonical_float(mesh[key], problems, f"mesh.{key}")
            if canon is not None:
                mesh[key] = canon
    for key in ("nx", "ny"):
        if key in mesh:
            canon = _canonical_int(mesh[key], problems, f"mesh.{key}")
            if canon is not None:
                mesh[key] = canon
    _positive(raw, "mesh", "length", problems)
    _positive(raw, "mesh", "height", problems)

    mat = raw.get("material", {})
    if "degradation.kind" in mat:
        if mat["degradation.kind"] not in ("at", "quadratic"):
            problems.append(
                "material.degradation.kind: must be at or quadratic, "
                f"got {mat['degradation.kind']!r}"
            )
    for key in _KEY_ORDER["material"]:
        if key not in mat or key == "degradation.kind":
            continue
        text = mat[key].strip()
        if key == "viscosity.D0_scale" and text.lower() == "none":
            mat[key] = "none"
            continue
        if key == "dissipation.eta" and text.lower() == "default":
            mat[key] = "default"
            continue
        canon = _canonical_float(text, problems, f"material.{key}")
        if canon is not None:
            mat[key] = canon
    for key in ("damage.Gc", "degradation.eps0", "gradient.kappa"):
        if key in mat and mat[key] not in ("none", "default"):
            _positive(raw, "material", key, problems)
    for key in ("rho", "viscosity.chi_R", "gradient.eps_g",
                "degradation.eps"):
        if key in mat:
            _positive(raw, "material", key, problems, strict=False)
    if mat.get("dissipation.eta") not in (None, "default"):
        _positive(raw, "material", "dissipation.eta", problems, strict=False)
    if mat.get("viscosity.D0_scale", "none") != "none":
        _positive(raw, "material", "viscosity.D0_scale", problems)
    try:
        if "gradient.p" in mat and float(mat["gradient.p"]) < 2.0:
            problems.append("material.gradient.p: must be >= 2")
    except ValueError:
        pass  # already reported by canonicalization

    sol = raw.get("solver", {})
    if "grad_tol" in sol:
        canon = _canonical_float(sol["grad_tol"], problems, "solver.grad_tol")
        if canon is not None:
            sol["grad_tol"] = canon
        _positive(raw, "solver", "grad_tol", problems)
    for key in ("max_newton", "max_sweeps"):
        if key in sol:
            canon = _canonical_int(sol[key], problems, f"solver.{key}")
            if canon is not None:
                sol[key] = canon
    if "armijo" in sol:
        canon = _canonical_float(sol["armijo"], problems, "solver.armijo")
        if canon is not None:
            sol["armijo"] = canon
            if not 0.0 < float(canon) < 1.0:
                problems.append("solver.armijo: must be in (0, 1)")
    if "mode" in sol and sol["mode"] not in ("monolithic", "staggered"):
        problems.append(
            f"solver.mode: must be monolithic or staggered, got {sol['mode']!r}"
        )

    dim = {"interval": 1, "rectangle": 2}.get(kind, 0)
    tags = _TAGS.get(kind, ())
    for section in ("dirichlet", "tractions"):
        for key in list(raw.get(section, {})):
            where = f"{section}.{key}"
            parts = key.rsplit(".", 1)
            if len(parts) != 2 or not parts[1].isdigit():
                problems.append(f"{where}: expected <tag>.<component>")
                continue
            tag, comp = parts[0], int(parts[1])
            if tags and tag not in tags:
                problems.append(
                    f"{where}: unknown boundary tag {tag!r} "
                    f"(known: {', '.join(tags)})"
                )
            if dim and comp >= dim:
                problems.append(
                    f"{where}: component {comp} out of range for dim {dim}"
                )
            canon = _canonical_program(raw[section][key], problems, where)
            if canon is not None:
                raw[section][key] = canon
    for key in list(raw.get("body", {})):
        where = f"body.{key}"
        if not key.isdigit() or (dim and int(key) >= dim):
            problems.append(f"{where}: component out of range for dim {dim}")
            continue
        canon = _canonical_program(raw["body"][key], problems, where)
        if canon is not None:
            raw["body"][key] = canon

    init = raw.get("initial", {})
    for key in list(init):
        canon = _canonical_float(init[key], problems, f"initial.{key}")
        if canon is not None:
            init[key] = canon
    if "seam_alpha" in init:
        if dim == 1:
            problems.append("initial.seam_alpha: seams need a rectangle mesh")
        for key in ("seam_y", "seam_x_max"):
            if key not in init:
                problems.append(f"missing required key initial.{key}")
        if init.get("seam_alpha") and not (
            0.0 <= float(init["seam_alpha"]) <= 1.0
        ):
            problems.append("initial.seam_alpha: must be within [0, 1]")

    if mat.get("rho") == repr(0.0) and not raw.get("dirichlet"):
        problems.append(
            "material.rho: quasistatic runs (rho = 0) need at least one "
            "dirichlet entry to fix rigid motions"
        )

    if problems:
        raise ScenarioValidationError(problems)

    # construct once to surface constitutive violations with context
    t_end = float(sc["t_end"])
    tau_req = float(sc["tau"])
    tau, n_steps, adjusted = adjust_tau(t_end, tau_req)
    warnings = []
    if adjusted:
        warnings.append(
            f"time step adjusted from {tau_req:g} to {tau:g} so that "
            f"{n_steps} steps exactly cover t_end = {t_end:g}"
        )
    scenario = Scenario(
        name=name,
        raw=raw,
        t_end=t_end,
        tau=tau,
        n_steps=n_steps,
        freeze_damage=sc.get("freeze_damage", "false") == "true",
        output_every=int(sc.get("output_every", "1")),
        warnings=warnings,
    )
    try:
        scenario.material()
        scenario.solver_config()
    except (KVDamageError, ValueError) as exc:
        raise ScenarioValidationError([str(exc)])
    return scenario


def parse_scenario_file(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def serialize_scenario(sc: Scenario) -> str:
    """Canonical INI text; parse(serialize(parse(x))) == parse(x)."""
    out = io.StringIO()
    first = True
    for section in _SECTION_ORDER:
        if section not in sc.raw or not sc.raw[section]:
            continue
        if not first:
            out.write("\n")
        first = False
        out.write(f"[{section}]\n")
        entries = sc.raw[section]
        order = _KEY_ORDER.get(section)
        keys = (
            [k for k in order if k in entries] if order else sorted(entries)
        )
        for key in keys:
            out.write(f"{key} = {entries[key]}\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# builtins
# ---------------------------------------------------------------------------


_BUILTIN_TEXTS = {
    # dynamically loaded bar, damage develops but the bar survives
    "bar1d": """
[scenario]
name = bar1d
t_end = 0.5
tau = 0.05

[mesh]
kind = interval
length = 1.0
nx = 100

[material]
rho = 1.3
degradation.kind = at
degradation.eps = 0.1
elastic.lambda = 0.0
elastic.mu = 1.0
viscosity.D0_scale = 0.5
viscosity.chi_R = 0.25
damage.Gc = 1.5
degradation.eps0 = 0.2
dissipation.eta = 0.2
gradient.kappa = 0.3
gradient.p = 2.0

[dirichlet]
left.0 = 0.0

[tractions]
right.0 = ramp 6.0
""",
    # plane strain plate with a soft seam, pulled upward; eta = 0 so all
    # damage dissipation flows through the viscous channel
    "notched_plate2d": """
[scenario]
name = notched_plate2d
t_end = 0.05
tau = 0.003125

[mesh]
kind = rectangle
length = 1.0
height = 1.0
nx = 32
ny = 32

[material]
rho = 1.0
degradation.kind = at
degradation.eps = 0.1
elastic.lambda = 1.0
elastic.mu = 1.0
viscosity.D0_scale = 0.1
viscosity.chi_R = 0.0
damage.Gc = 1.5
degradation.eps0 = 0.2
dissipation.eta = 0.0
gradient.kappa = 0.3
gradient.p = 2.0

[dirichlet]
bottom.0 = 0.0
bottom.1 = 0.0

[tractions]
top.1 = ramp 8.0

[initial]
seam_alpha = 0.15625
seam_y = 0.5
seam_x_max = 0.3
""",
    # fixed-free single element with an initial tip velocity and frozen
    # damage: one vibration mode with an exact damped solution
    "oscillator_frozen": """
[scenario]
name = oscillator_frozen
t_end = 1.0
tau = 0.05
freeze_damage = true

[mesh]
kind = interval
length = 1.0
nx = 1

[material]
rho = 1.0
degradation.kind = at
degradation.eps = 0.1
elastic.lambda = 0.0
elastic.mu = 1.0
viscosity.D0_scale = none
viscosity.chi_R = 0.0
damage.Gc = 1.5
degradation.eps0 = 0.2
dissipation.eta = 0.0
gradient.kappa = 0.3
gradient.p = 2.0

[dirichlet]
left.0 = 0.0

[initial]
v_linear_x = 1.0
""",
    # inertia-free bar pulled slowly: the viscous and damage rate terms
    # set the time scale
    "quasistatic_bar": """
[scenario]
name = quasistatic_bar
t_end = 0.5
tau = 0.05

[mesh]
kind = interval
length = 1.0
nx = 50

[material]
rho = 0.0
degradation.kind = at
degradation.eps = 0.1
elastic.lambda = 0.0
elastic.mu = 1.0
viscosity.D0_scale = 0.5
viscosity.chi_R = 0.25
damage.Gc = 1.5
degradation.eps0 = 0.2
dissipation.eta = 0.7
gradient.kappa = 0.3
gradient.p = 2.0

[dirichlet]
left.0 = 0.0

[tractions]
right.0 = ramp 1.0
""",
}

BUILTIN_NAMES = tuple(sorted(_BUILTIN_TEXTS))


def builtin_scenario(name: str) -> Scenario:
    """One of the shipped scenarios, by name (see BUILTIN_NAMES)."""
    try:
        text = _BUILTIN_TEXTS[name]
    except KeyError:
        raise UnknownScenarioError(
            f"unknown builtin scenario {name!r} "
            f"(available: {', '.join(BUILTIN_NAMES)})"
        )
    return parse_scenario(text)


# ---------------------------------------------------------------------------
# run driver
# ---------------------------------------------------------------------------


@dataclass
class ScenarioRun:
    """Output bundle of run_scenario."""

    scenario: Scenario
    setup: RunSetup
    trajectory: object
    report: object
    stats: list
    tau: float
    tau0: float | None
    warnings: list


def scenario_tau0(sc: Scenario):
    """Convexity time step threshold of the scenario material, or None."""
    try:
        return critical_timestep(sc.material())
    except NotPositiveDefiniteError:
        return None


def run_scenario(sc: Scenario, tau: float = None,
                 strict_tau0: bool = False) -> ScenarioRun:
    """Build and march one scenario; tau overrides the file's time step.

    With strict_tau0 the run refuses to start unless the step is within
    the certified convexity range.
    """
    warnings = list(sc.warnings)
    if tau is not None:
        tau, n_steps, adjusted = adjust_tau(sc.t_end, tau)
        if adjusted:
            warnings.append(
                f"time step adjusted to {tau:g} so that {n_steps} steps "
                f"exactly cover t_end = {sc.t_end:g}"
            )
    else:
        tau, n_steps = sc.tau, sc.n_steps
    tau0 = scenario_tau0(sc)
    if strict_tau0:
        if tau0 is None:
            raise ScenarioValidationError(
                ["strict mode: the material has no convexity threshold "
                 "(no damage independent viscosity)"]
            )
        if tau > tau0 * (1.0 + 1e-12):
            raise ScenarioValidationError(
                [f"strict mode: tau = {tau:g} exceeds the convexity "
                 f"threshold tau0 = {tau0:g}"]
            )
    setup = sc.build()

    from .integrator import run_time_loop

    traj, report, stats = run_time_loop(
        setup.geom, setup.material, setup.initial, tau, n_steps,
        loads=setup.loads, dofmap=setup.dofmap, cfg=setup.cfg,
        freeze_damage=sc.freeze_damage,
    )
    return ScenarioRun(
        scenario=sc, setup=setup, trajectory=traj, report=report,
        stats=stats, tau=tau, tau0=tau0, warnings=warnings,
    )
