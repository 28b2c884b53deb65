"""Exception types raised across the package."""


class SketchDAError(Exception):
    """Base class for every error raised by sketchda."""


class ConfigurationError(SketchDAError, ValueError):
    """Invalid sizes, shapes or parameters supplied by the caller."""


class StreamFormatError(SketchDAError, ValueError):
    """A streamed record is malformed or has the wrong dimensionality."""


class InputError(SketchDAError, ValueError):
    """Bad arguments to an evaluation or embedding call."""


class StateError(SketchDAError, RuntimeError):
    """Operation not valid for the current state (e.g. empty stream)."""


class NumericalError(SketchDAError, ArithmeticError):
    """A decomposition failed or a quantity is not finite."""


class SingularityError(NumericalError):
    """The regularized within-class scatter is not positive definite."""
