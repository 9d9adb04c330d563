"""Exception hierarchy shared by all modules."""


class EssRateError(Exception):
    """Base class for every error raised by the package."""


class CatalogError(EssRateError, KeyError):
    pass


class ParameterError(EssRateError, ValueError):
    pass


class ShapeError(EssRateError, ValueError):
    pass


class SingularityError(EssRateError, ValueError):
    pass


class InvariantError(EssRateError, ValueError):
    """A tableau, polynomial or rescaling violates its structural invariants."""


class DomainError(EssRateError, ValueError):
    """Rate fitting received data outside the domain of the log transform."""


class ModeError(EssRateError, ValueError):
    pass


class ConfigError(EssRateError, ValueError):
    pass


class NumericalError(EssRateError, ArithmeticError):
    """Failure of a numerical procedure (exit code 2 in the CLI)."""


class DivergenceError(NumericalError):
    pass


class StallError(NumericalError):
    pass


class EigensolverError(NumericalError):
    pass


class IntegrationError(NumericalError):
    pass
