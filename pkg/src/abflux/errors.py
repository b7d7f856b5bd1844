"""Exception hierarchy shared by all modules."""


class ABFluxError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(ABFluxError, ValueError):
    pass


class SingularityError(ABFluxError):
    """A field or transform was evaluated too close to the puncture q = 0."""


class IncompleteOrbitError(SingularityError):
    """Frozen orbit passes through the origin, so the frozen flow is not complete."""


class UndefinedAngleError(ABFluxError, ValueError):
    """Action-angle coordinates requested on the null set v = 0 or c = 0."""


class NoHittingError(ABFluxError):
    pass


class DomainError(ABFluxError, ValueError):
    pass


class KinkCrossingError(ABFluxError):
    """Averaged field evaluated on (or chattering across) the kink J1 = J2."""


class ConvergenceError(ABFluxError):
    """Picard iteration failed to contract."""


class StepSizeUnderflow(ABFluxError):
    pass


class ConfigError(ABFluxError, ValueError):
    """Malformed or inconsistent run configuration."""
