"""Exception types raised by the library.

Everything derives from KVDamageError so callers can catch library failures
with a single except clause.  The CLI maps these onto exit codes.
"""


class KVDamageError(Exception):
    """Base class for all library errors."""


class DegenerateLawError(KVDamageError):
    """A constitutive law violates a structural requirement (sign, convexity)."""


class NotPositiveDefiniteError(KVDamageError):
    """A tensor or matrix that must be SPD is not."""


class NoWitnessFoundError(KVDamageError):
    """Nonconvexity witness search exhausted its budget without success."""

    def __init__(self, message, margin=None):
        super().__init__(message)
        self.margin = margin


class BadSpecError(KVDamageError):
    """Invalid mesh/geometry construction request."""


class FileFormatError(KVDamageError):
    """A mesh or result file does not conform to the documented format."""


class InconsistentConstraintError(KVDamageError):
    """The same DOF is constrained twice with conflicting values."""


class InfeasibleError(KVDamageError):
    """A state violates the step constraints beyond tolerance."""


class NoConvergenceError(KVDamageError):
    """The step solver hit its iteration cap.

    Carries the per-step statistics collected so far, and optionally the
    partial trajectory when raised from a time loop.
    """

    def __init__(self, message, stats=None, step=None, trajectory=None):
        super().__init__(message)
        self.stats = stats
        self.step = step
        self.trajectory = trajectory


class LinearSolveFailureError(KVDamageError):
    """Sparse factorization or substitution failed."""


class MaxSweepsError(KVDamageError):
    """The staggered iteration hit its sweep cap."""

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats


class ScenarioParseError(KVDamageError):
    """Scenario file is syntactically malformed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ScenarioValidationError(KVDamageError):
    """Scenario file parsed but contains invalid or unknown entries.

    Collects every violation so the user sees all of them at once.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class UnknownScenarioError(KVDamageError):
    """Requested builtin scenario name does not exist."""
