"""Exception hierarchy with the process exit code each error maps to."""


class LQGameError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ValidationError(LQGameError):
    """A model or prior violates a standing assumption or is malformed."""

    exit_code = 1


class StructuralError(ValidationError):
    """Declared dimensions disagree with the shape of a supplied matrix."""


class SolverError(LQGameError):
    """Numerical failure inside the equilibrium solver or a filter step."""

    exit_code = 2


class NoUniqueEquilibriumError(SolverError):
    """The stacked gain system is singular at some time step."""


class DegenerateSignalError(SolverError):
    """An inversion required by a filter update is numerically singular."""


class AdmissibilityError(SolverError):
    """An opponent gain block is rank deficient, so its action is not informative."""


class VerificationError(LQGameError):
    """A verification suite found at least one failed check."""

    exit_code = 3


class IOFailure(LQGameError):
    """Reading a configuration or writing an output file failed."""

    exit_code = 4
