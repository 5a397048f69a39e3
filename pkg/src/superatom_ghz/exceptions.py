"""Exception types shared across the package."""


class GHZSimError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(GHZSimError, ValueError):
    pass


class InvalidStateError(GHZSimError, RuntimeError):
    pass


class UndefinedValueError(GHZSimError, ValueError):
    """An estimator was asked for a value that does not exist (e.g. zero counts)."""


class NoSignalError(GHZSimError, ValueError):
    pass


class ConfigError(GHZSimError, ValueError):
    pass


class DataError(GHZSimError, ValueError):
    pass
