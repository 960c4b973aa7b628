"""Exception types shared across the package."""


class MultiscanError(Exception):
    """Base class for multiscan-specific failures."""


class ConfigurationError(MultiscanError):
    """Mismatched inputs: wrong collection for a dataset, missing calibration."""


class CalibrationError(MultiscanError):
    """Monte Carlo calibration could not be completed (too few replicates,
    bracketing failure in the blocked-scan tuning, ...)."""


class ExperimentError(MultiscanError):
    """A power experiment failed, e.g. the 50%-power bisection lost its bracket."""


class StorageError(MultiscanError):
    """Calibration table persistence failed."""


class ChecksumError(StorageError):
    """A persisted calibration entry failed its integrity check."""


class DegenerateWindowError(ValueError):
    """Order-statistic window with zero empirical width (tied endpoints)."""


class InputFormatError(MultiscanError):
    """A data file could not be parsed; the message names the offending line."""
