"""Error taxonomy shared across the package.

Exit-code mapping used by the CLI: config 2, data 3, numeric 4.
"""


class WaveboundError(Exception):
    """Base class for all package errors."""


class ConfigError(WaveboundError):
    """Invalid configuration: bad shapes, bad hyperparameters, bad flags."""


class DataError(WaveboundError):
    """Unusable input data: malformed CSV, empty dataset, corrupt checkpoint."""


class NumericError(WaveboundError):
    """Numerical failure during training: non-finite loss or gradients."""
