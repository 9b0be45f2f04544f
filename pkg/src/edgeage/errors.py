"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4, anything else -> 1.
"""


class EdgeAgeError(Exception):
    """Base class for all package-specific errors."""

    exit_code = 1


class ContractError(EdgeAgeError):
    """A caller violated an operation's precondition."""


class ShapeError(ContractError):
    """Tensor/image shapes are incompatible for the requested operation."""


class ConfigError(EdgeAgeError):
    """Invalid run configuration (unknown key, bad value, missing file)."""

    exit_code = 2


class DataError(EdgeAgeError):
    """Invalid or missing input data (manifest, images, landmarks, stores)."""

    exit_code = 3


class NumericError(EdgeAgeError):
    """Non-finite values encountered during optimization."""

    exit_code = 4


class CheckpointError(EdgeAgeError):
    """Checkpoint file malformed or inconsistent with the target network."""
