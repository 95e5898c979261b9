"""Exception hierarchy shared across the solvers."""


class ModelError(Exception):
    """Base class for all hemoflow errors."""


class CollapseError(ModelError):
    """A cross-sectional area or volume became non-positive."""


class ConvergenceError(ModelError):
    """An iterative solve failed to reach its tolerance."""


class SupercriticalError(ModelError):
    """Flow velocity reached or exceeded the local wave speed."""


class ConfigurationError(ModelError):
    """Invalid network topology, vessel typing or parameter set."""
