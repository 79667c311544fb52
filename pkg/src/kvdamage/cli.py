"""Command line interface.

    kvdamage run   <scenario-file|builtin:NAME> [--tau X] [--out DIR]
                   [--strict-tau0]
    kvdamage study <scenario-file|builtin:NAME> [--levels N] [--tau X]
    kvdamage tau0  <scenario-file|builtin:NAME>

Exit codes: 0 success, 2 scenario or argument validation, 3 solver
nonconvergence, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from .errors import (
    FileFormatError,
    KVDamageError,
    LinearSolveFailureError,
    MaxSweepsError,
    NoConvergenceError,
)
from .io import export_csv, export_vtk
from .materials import (
    NoWitnessFoundError,
    semiconvexity_constant,
    stored_hessian_psd_check,
    visco_damage_nonconvexity_witness,
)
from .scenarios import (
    Scenario,
    builtin_scenario,
    parse_scenario_file,
    run_scenario,
    scenario_tau0,
)
from .study import run_convergence_study

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NO_CONVERGENCE = 3
EXIT_IO = 4

WITNESS_PENALTY = 1e6


def _load_scenario(ref: str) -> Scenario:
    if ref.startswith("builtin:"):
        return builtin_scenario(ref[len("builtin:"):])
    return parse_scenario_file(ref)


def _print_warnings(warnings):
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)


def _cmd_run(args) -> int:
    sc = _load_scenario(args.scenario)
    run = run_scenario(sc, tau=args.tau, strict_tau0=args.strict_tau0)
    _print_warnings(run.warnings)

    traj, report, stats = run.trajectory, run.report, run.stats
    for k, stat in enumerate(stats, start=1):
        st = traj.states[k]
        line = (
            f"step {k:4d}  t={st.t:<12.6g} newton={stat.iterations:3d} "
            f"pg={stat.pg_norm:10.3e} energy={stat.energy:14.8e}"
        )
        if stat.sweeps:
            line += f" sweeps={stat.sweeps}"
        if not stat.certified:
            line += " [uncertified]"
        print(line)

    total = report.total
    print(f"final time {traj.t_end:g} after {traj.n_steps} steps")
    print(f"  kinetic {report.kinetic[-1]:.8e}  stored {report.stored[-1]:.8e}")
    print(
        f"  dissipated: viscous {report.visc_diss[-1]:.8e}"
        f"  damage {report.dam_diss[-1]:.8e}"
    )
    print(f"  external work {report.ext_work[-1]:.8e}")
    amin = min(float(st.alpha.min()) for st in traj.states)
    print(f"  min damage field value {amin:.6f}")
    if run.tau0 is not None:
        status = "certified" if run.tau <= run.tau0 else "advisory"
        print(
            f"  energy inequality ({status}, tau0={run.tau0:g}): "
            f"min margin {report.ineq_margin.min():.3e}"
        )
    else:
        print(
            "  energy inequality (advisory, no tau0): "
            f"min margin {report.ineq_margin.min():.3e}"
        )

    if args.out:
        os.makedirs(args.out, exist_ok=True)
        csv_path = os.path.join(args.out, "energy.csv")
        export_csv(traj, report, stats, csv_path)
        dumped = 0
        for k, st in enumerate(traj.states):
            if k % sc.output_every == 0 or k == traj.n_steps:
                export_vtk(
                    st, run.setup.mesh,
                    os.path.join(args.out, f"state_{k:06d}.vtk"),
                )
                dumped += 1
        print(f"wrote {csv_path} and {dumped} VTK dumps to {args.out}")
    return EXIT_OK


def _cmd_study(args) -> int:
    sc = _load_scenario(args.scenario)
    result = run_convergence_study(sc, levels=args.levels, tau=args.tau)
    for line in result.summary_lines():
        print(line)
    return EXIT_OK


def _cmd_tau0(args) -> int:
    sc = _load_scenario(args.scenario)
    material = sc.material()
    kconst = semiconvexity_constant(material)
    tau0 = scenario_tau0(sc)
    print(f"semiconvexity constant K = {kconst:.17g}")
    if tau0 is None:
        print(
            "tau0: none (viscosity has no damage independent part, "
            "steps run uncertified)"
        )
    else:
        print(f"tau0 = {tau0:.17g}")

    psd = stored_hessian_psd_check(material, K=kconst)
    print(
        f"stored energy PSD check at K: "
        f"{'passed' if psd.passed else 'FAILED'} "
        f"(min eigenvalue {psd.min_eig:.3e}, tolerance {psd.tol:.3e}, "
        f"{psd.n_samples} samples, worst alpha {psd.worst_alpha:g})"
    )
    try:
        wit = visco_damage_nonconvexity_witness(material, K=WITNESS_PENALTY)
        print(
            "damage dependent viscosity stays nonconvex: witness at "
            f"alpha {wit.alpha:g}, strain magnitude "
            f"{float(abs(wit.strain).max()):.3e}, "
            f"min eigenvalue {wit.min_eig:.3e} (penalty {WITNESS_PENALTY:g})"
        )
    except NoWitnessFoundError as exc:
        print(
            "no nonconvexity witness found (best curvature margin "
            f"{exc.margin:.3e}); the coupled density may be convexifiable"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kvdamage",
        description=(
            "Implicit variational time stepping for dynamic damage in "
            "Kelvin-Voigt viscoelastic solids"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario")
    run_p.add_argument("scenario", help="scenario file path or builtin:NAME")
    run_p.add_argument("--tau", type=float, default=None,
                       help="override the scenario time step")
    run_p.add_argument("--out", default=None,
                       help="directory for CSV ledger and VTK dumps")
    run_p.add_argument("--strict-tau0", action="store_true",
                       help="refuse steps beyond the convexity threshold")
    run_p.set_defaults(fn=_cmd_run)

    study_p = sub.add_parser("study", help="tau refinement study")
    study_p.add_argument("scenario", help="scenario file path or builtin:NAME")
    study_p.add_argument("--levels", type=int, default=3,
                         help="number of halving levels (at least 3)")
    study_p.add_argument("--tau", type=float, default=None,
                         help="base time step for the coarsest level")
    study_p.set_defaults(fn=_cmd_study)

    tau0_p = sub.add_parser(
        "tau0", help="print the convexity threshold and check reports"
    )
    tau0_p.add_argument("scenario", help="scenario file path or builtin:NAME")
    tau0_p.set_defaults(fn=_cmd_tau0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (NoConvergenceError, MaxSweepsError, LinearSolveFailureError) as exc:
        print(f"error: solver did not converge: {exc}", file=sys.stderr)
        if getattr(exc, "step", None) is not None:
            print(f"  failed at step {exc.step}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except FileFormatError as exc:
        print(f"error: bad file: {exc}", file=sys.stderr)
        return EXIT_IO
    except KVDamageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
