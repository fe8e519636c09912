"""Exception hierarchy shared by the whole pipeline.

Each class carries the process exit code the CLI maps it to, so stage
failures stay distinguishable from the shell.
"""


class GaitBreathError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class FormatError(GaitBreathError):
    """A file on disk violates one of the on-disk format contracts."""

    exit_code = 2


class ParameterError(GaitBreathError):
    """A configuration value or call precondition is invalid."""

    exit_code = 3


class NumericalError(GaitBreathError):
    """An iterative solver failed to reach its tolerance."""

    exit_code = 4


class DataQualityError(GaitBreathError):
    """Input data is too degraded for the requested stage."""

    exit_code = 5


class EmptySignalError(DataQualityError):
    """No frame of a recording produced a usable measurement."""


class UnusableChannelError(DataQualityError):
    """A channel has too few surviving samples to repair."""


class SelectionError(DataQualityError):
    """No channel is usable for informative-signal selection."""


class FeatureError(DataQualityError):
    """The selected signal cannot support feature extraction."""


class TrainingError(DataQualityError):
    """The training set cannot produce a classifier."""
