"""Dynamic damage in Kelvin-Voigt viscoelastic solids, solved implicitly.

Each time step of the coupled displacement/damage system is a bound
constrained minimization of an incremental potential; below the critical
time step returned by `critical_timestep` that problem is certifiably
convex and the discrete energy inequality holds step by step.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    BadSpecError,
    DegenerateLawError,
    FileFormatError,
    InconsistentConstraintError,
    InfeasibleError,
    KVDamageError,
    LinearSolveFailureError,
    MaxSweepsError,
    NoConvergenceError,
    NotPositiveDefiniteError,
    NoWitnessFoundError,
    ScenarioParseError,
    ScenarioValidationError,
    UnknownScenarioError,
)
from .materials import (  # noqa: F401
    ATDegradation,
    ATQuadraticDamage,
    CustomDamageEnergy,
    DamageEnergy,
    DegradationLaw,
    DissipationLaw,
    ElasticTensor,
    GradientTerm,
    MaterialParams,
    QuadraticDegradation,
    TabulatedDegradation,
    ViscosityModel,
    critical_timestep,
    driving_force,
    gamma_extrema,
    semiconvexity_constant,
    stored_hessian_psd_check,
    stress,
    tensor_norms,
    visco_damage_nonconvexity_witness,
)
from .mesh import (  # noqa: F401
    DofMap,
    Mesh,
    build_interval_mesh,
    build_rectangle_mesh,
    read_mesh,
    write_mesh,
)
from .assembly import (  # noqa: F401
    ElementGeometry,
    LoadSpec,
    apply_dirichlet,
    assemble_degraded_stiffness,
    assemble_loads,
    assemble_mass,
    assemble_scalar_mass,
    assemble_stiffness,
    element_geometry,
    scalar_stiffness,
    time_averaged_loads,
)
from .step_problem import (  # noqa: F401
    State,
    StepProblem,
    build_step_problem,
    viscosity_matrix,
    weak_momentum_residual,
)
from .solver import (  # noqa: F401
    SolverConfig,
    StepStats,
    solve_step,
    velocity_update,
)
from .integrator import (  # noqa: F401
    EnergyReport,
    Trajectory,
    apriori_diagnostics,
    check_energy_inequality,
    energy_report,
    kinetic_telescoping_residual,
    run_time_loop,
)
from .scenarios import (  # noqa: F401
    BUILTIN_NAMES,
    Scenario,
    ScenarioRun,
    builtin_scenario,
    parse_scenario,
    parse_scenario_file,
    run_scenario,
    scenario_tau0,
    serialize_scenario,
)
from .study import (  # noqa: F401
    ModeComparison,
    StudyResult,
    compare_solver_modes,
    modal_reference,
    run_convergence_study,
)
from .io import (  # noqa: F401
    export_csv,
    export_vtk,
    read_csv,
    read_vtk,
)
