"""Exception taxonomy shared across the package.

Exit-code mapping used by the CLI: ConfigError -> 1, NumericError and
TrainingError -> 2, I/O failures (OSError) -> 3.
"""


class HedgelabError(Exception):
    """Base class for all package errors."""


class ConfigError(HedgelabError):
    """Invalid configuration: bad shapes, out-of-range labels, unknown variants."""


class ShapeError(ConfigError):
    """Operand shapes are incompatible."""


class NumericError(HedgelabError):
    """A computation produced a non-finite value."""


class TrainingError(HedgelabError):
    """Training diverged or could not proceed."""
