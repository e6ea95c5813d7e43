"""Exception hierarchy shared by all modules.

Exit codes follow the CLI contract: 2 for configuration/argument problems,
3 for data problems (files, parsing, shapes), 4 for numeric failures.
"""


class CgadError(Exception):
    exit_code = 1


class ConfigError(CgadError):
    """Bad configuration value or unusable setting combination."""

    exit_code = 2


class ArgumentError(ConfigError):
    """Precondition violation on a function argument."""


class StateError(ConfigError):
    """Operation invoked in an invalid order (e.g. backward before forward)."""


class DataError(CgadError):
    """Problem with input data or artifact files."""

    exit_code = 3


class ParseError(DataError):
    """Malformed file content; message names the offending location."""


class DimensionError(DataError):
    """Shape or length mismatch between related inputs."""


class FormatError(DataError):
    """Artifact file has a wrong version tag or is truncated/corrupt."""


class NumericError(CgadError):
    """Non-finite value where a finite one is required."""

    exit_code = 4
