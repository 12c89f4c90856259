"""Exception hierarchy shared across the package.

Every error raised on a documented failure path derives from
:class:`MatnormError`, so callers (including the command-line driver) can
distinguish numerical failures from configuration/IO mistakes.
"""


class MatnormError(Exception):
    """Base class for all package-specific errors."""


class ShapeMismatch(MatnormError):
    """Operands have incompatible dimensions."""


class NotPositiveDefinite(MatnormError):
    """A matrix required to be symmetric positive definite is not."""


class NoConvergence(MatnormError):
    """An iterative scheme exhausted its iteration budget."""


class DimensionCap(MatnormError):
    """A requested dense object would exceed the configured size cap."""


class InfeasibleDesign(MatnormError):
    """No valid ground-truth model exists for the requested design."""


class DegenerateData(MatnormError):
    """The data carry no usable signal (e.g. identically zero)."""


class IllPosed(MatnormError):
    """An unpenalized subproblem is singular for the given sample sizes."""


class DomainError(MatnormError):
    """Arguments outside the mathematical domain of a formula."""


class InsufficientData(MatnormError):
    """Not enough valid inputs to carry out the requested computation."""


class ConfigError(MatnormError):
    """Invalid configuration, file format, or IO problem."""
