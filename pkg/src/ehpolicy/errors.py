"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration file or parameter set failed validation."""


class CausalityError(ValueError):
    """An energy action exceeded the available battery charge."""


class DegenerateConfigError(ValueError):
    """A verification routine was invoked outside its premises."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap before converging."""


class ReducibleChainWarning(UserWarning):
    """The chain induced by a policy has more than one recurrent class."""
