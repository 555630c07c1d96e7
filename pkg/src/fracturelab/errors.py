"""Exception classes shared across the package.

Each class maps to one failure mode of the pipeline; the CLI assigns one
exit code per group (see ``cli.EXIT_CODES``).
"""


class FractureLabError(Exception):
    """Base class for all package errors."""


class ConfigError(FractureLabError):
    """Malformed or incomplete experiment configuration."""

    def __init__(self, message, section=None, field=None):
        self.section = section
        self.field = field
        where = ""
        if section or field:
            where = f" [{section or '?'}.{field or '?'}]"
        super().__init__(message + where)


# geometry ------------------------------------------------------------------

class NonConformingCrack(FractureLabError):
    """Crack edge does not coincide with a grid edge."""


class BudgetTooLarge(FractureLabError):
    """No admissible cover exists at the crack's scale."""


class InvalidProbe(FractureLabError):
    """Probe point outside the closed domain."""


# solver --------------------------------------------------------------------

class SingularSystem(FractureLabError):
    """The domain declares no Dirichlet boundary, so the datum binds nowhere."""


class NoConvergence(FractureLabError):
    """Iterative solver exhausted its iteration budget."""

    def __init__(self, message, iterations=None, residual=None):
        self.iterations = iterations
        self.residual = residual
        super().__init__(message)


# energy model ---------------------------------------------------------------

class UnsupportedKind(FractureLabError):
    """No closed-form conjugate registered for this integrand kind."""


# singularity analysis -------------------------------------------------------

class RadiusUnresolvable(FractureLabError):
    """Probe radius below the grid resolution floor (r <= 2h)."""


class DegenerateFit(FractureLabError):
    """Exponent fit impossible (zero local energies)."""


# dual bound -----------------------------------------------------------------

class UnresolvableCover(FractureLabError):
    """Cover member too small for the grid (needs r >= 4h)."""


class CompatibilityViolated(FractureLabError):
    """Pure-Neumann corrector data fails the discrete compatibility check."""


class ResidualTooLarge(FractureLabError):
    """Assembled stress field fails the admissibility residual threshold."""


# search / evolution ---------------------------------------------------------

class EmptyFamily(FractureLabError):
    """Crack family enumerates to nothing."""


class InsufficientData(FractureLabError):
    """Not enough trajectory points for the requested fit."""


# poincare lab ----------------------------------------------------------------

class EigenNoConvergence(FractureLabError):
    """Inverse iteration failed to converge to the requested tolerance."""
