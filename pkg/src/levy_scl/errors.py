"""Exception types shared across the package."""


class LevySclError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(LevySclError, ValueError):
    """A structural assumption on the input data does not hold."""


class ContractError(LevySclError, ValueError):
    """A caller violated a documented precondition."""


class ConfigError(LevySclError, ValueError):
    """A configuration file or solver setting is invalid."""


class NumericalError(LevySclError, RuntimeError):
    """A numerical procedure failed to converge or blew up."""
