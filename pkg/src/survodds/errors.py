"""Exception types raised across the package."""


class SurvOddsError(Exception):
    """Base class for all survodds errors."""


class InvalidModelError(SurvOddsError):
    """Model produced a non-finite or otherwise inadmissible value."""


class DegenerateOddsError(SurvOddsError):
    """Survival odds are infinite (odds function is zero at the requested time)."""


class NumericInversionError(SurvOddsError):
    """Inverting the odds function failed; carries bracketing diagnostics."""


class FitFailureError(SurvOddsError):
    """A nuisance fit did not converge."""


class PositivityViolationError(SurvOddsError):
    """Only one treatment arm present, or a propensity hits {0, 1}."""


class CoefficientSingularityError(SurvOddsError):
    """An IDE coefficient denominator is nonpositive, or the odds density
    vanishes on the interior of the grid."""


class SolverFailureError(SurvOddsError):
    """IDE solve finished with a residual above tolerance."""

    def __init__(self, message, residual_profile=None):
        super().__init__(message)
        self.residual_profile = residual_profile


class SingularityError(SurvOddsError):
    """Division by a vanishing odds density in a score integrand."""


class HorizonError(SurvOddsError):
    """An observed time lies beyond the solver grid."""


class NoRootError(SurvOddsError):
    """The estimating equation has no sign change on the admissible bracket."""


class NonIdentifiedError(SurvOddsError):
    """The data cannot identify the treatment effect (single-arm sample)."""


class FlatScoreError(SurvOddsError):
    """The score slope is numerically zero; no variance estimate possible."""


class ScenarioError(SurvOddsError):
    """A scenario configuration file is invalid."""
