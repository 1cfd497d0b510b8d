"""Exception hierarchy.

Every error carries the CLI exit code of its class so the command-line layer
can map failures without a lookup table.
"""


class ToaError(Exception):
    exit_code = 1


class ConfigError(ToaError, ValueError):
    """Invalid parameters or configuration."""

    exit_code = 2


class SaturatedDetector(ConfigError):
    """Detection rate times dead time is >= 1; the rate equation has no solution."""


class InconsistentLossBudget(ConfigError):
    """Measured powers imply a grating/taper transmission above unity."""


class BinNarrowerThanResolution(ConfigError):
    pass


class FormatError(ToaError):
    """Bad file magic, truncated file or malformed header."""

    exit_code = 3


class VersionMismatch(FormatError):
    pass


class NonMonotonicInput(FormatError, ValueError):
    """Timestamps are not strictly increasing."""


class StatisticalPreconditionError(ToaError, ValueError):
    exit_code = 4


class InputTooShort(StatisticalPreconditionError):
    pass


class ZeroVariance(StatisticalPreconditionError):
    pass


class TooFewSequences(StatisticalPreconditionError):
    pass
