"""Exception types shared across the toolkit."""


class GallopError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(GallopError):
    """Invalid run configuration (unknown keys, bad values)."""


class StepSizeUnderflow(GallopError):
    """The adaptive step controller drove the step below its floor."""

    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state


class NonFiniteState(GallopError):
    """The trajectory left the finite range (blow-up guard tripped)."""

    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state


class NoConvergence(GallopError):
    """An iterative solver failed to converge."""


class ResidualTooLarge(GallopError):
    """A state passed as an equilibrium does not satisfy the residual bound."""


class NoSignChange(GallopError):
    """A bisection bracket does not straddle a sign change."""


class NewtonDiverged(GallopError):
    """Newton iteration left its convergence basin."""


class NoReturn(GallopError):
    """A trajectory never re-crossed the Poincare section.

    Carries the terminating integrator event (escape, convergence or
    timeout) for diagnostics.
    """

    def __init__(self, message, event=None):
        super().__init__(message)
        self.event = event


class ContinuationStall(GallopError):
    """Pseudo-arclength continuation could not advance (step underflow)."""

    def __init__(self, message, last_point=None):
        super().__init__(message)
        self.last_point = last_point


class FocusLost(GallopError):
    """Eigenvalues became real where a complex pair was required."""
