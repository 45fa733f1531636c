"""Exception types shared across the package.

Each carries the CLI exit code and the machine-readable reason code used when
the error reaches the command line.
"""


class TNetError(Exception):
    exit_code = 1
    reason = "error"


class ShapeError(TNetError, ValueError):
    exit_code = 3
    reason = "shape_error"


class ConfigError(TNetError, ValueError):
    exit_code = 2
    reason = "config_error"


class DataError(TNetError, ValueError):
    exit_code = 3
    reason = "data_error"


class CheckpointError(TNetError, RuntimeError):
    exit_code = 4
    reason = "checkpoint_error"
