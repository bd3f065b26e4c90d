"""Exception hierarchy shared by the analytical and solver modules."""


class AmplabError(Exception):
    """Base class for all package errors."""


class NoSignChange(AmplabError, ValueError):
    """Root bracket does not straddle a sign change."""


class MaxIterExceeded(AmplabError, RuntimeError):
    """An iteration hit its budget before meeting tolerance.

    ``last`` holds the final iterate and ``residual`` its residual, when known.
    """

    def __init__(self, message, last=None, residual=None):
        super().__init__(message)
        self.last = last
        self.residual = residual


class BracketFailure(AmplabError, RuntimeError):
    """A unimodality bracket could not be established."""


class NoSolution(AmplabError, ValueError):
    """The defining equation has no root in the admissible range."""


class UndefinedObservable(AmplabError, ZeroDivisionError):
    """An observable's normalising denominator is zero."""


class AbovePT(AmplabError, ValueError):
    """A below-phase-transition quantity was requested above the boundary."""


class OversaturatedModel(AmplabError, ValueError):
    """Equilibrium detection rate reaches delta, so the calibrated penalty is not positive."""


class InadmissibleGamma(AmplabError, ValueError):
    """Gamma violates the admissibility window of the above-PT construction."""


class Diverged(AmplabError, RuntimeError):
    """An iterative solver left its guard region."""


class ConfigError(AmplabError, ValueError):
    """Invalid experiment configuration."""
