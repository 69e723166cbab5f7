"""Exception types shared across the package.

Input-validation problems subclass ValueError so callers that only care
about "bad input" can catch one base class; training divergence is a
RuntimeError because it can occur on well-formed input.
"""


class FormatError(ValueError):
    """A binary file or byte stream has a bad magic number or structure."""


class LengthError(ValueError):
    """A byte stream is shorter or longer than its header declares."""


class ConsistencyError(ValueError):
    """Two inputs that must agree (e.g. image/label counts) do not."""


class ParameterError(ValueError):
    """A scalar argument is outside its valid range."""


class DimensionError(ValueError):
    """An array argument has the wrong shape."""


class ConfigError(ValueError):
    """An attack or CLI configuration is invalid or inconsistent."""


class MetricError(ValueError):
    """An evaluation was requested on inputs where it is undefined."""


class TrainingError(RuntimeError):
    """Victim training produced non-finite losses or weights."""
