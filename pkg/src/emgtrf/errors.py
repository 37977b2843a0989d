"""Exception hierarchy. The CLI maps these onto exit codes."""


class EmgTrfError(Exception):
    """Base class for toolkit errors."""


class ConfigError(EmgTrfError):
    """Invalid or inconsistent run configuration."""


class DataError(EmgTrfError, ValueError):
    """Input data violates a contract (shape, rate, content)."""


class FormatError(DataError):
    """A file could not be parsed in one of the toolkit formats."""


class InvalidSpecError(EmgTrfError, ValueError):
    """A filter or alignment specification is unusable for the given signal."""


class ConstantChannelError(DataError):
    """A channel has zero variance where a standardized signal is required."""

    def __init__(self, channel):
        super().__init__(f"channel {channel!r} is constant; cannot standardize")
        self.channel = channel
