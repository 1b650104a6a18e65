"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: usage errors exit 2, configuration
errors 3, data errors 4, solver errors 5.
"""


class HemsimError(Exception):
    """Base class for all package-specific errors."""


# -- data ingestion -----------------------------------------------------------

class SchemaError(HemsimError):
    """A CSV file does not conform to its documented schema."""


class AlignmentError(HemsimError):
    """Input series do not share a usable common time range."""


class EmptySelection(HemsimError):
    """A filter selected too few rows to compute the requested statistic."""


# -- numerics -----------------------------------------------------------------

class DomainError(HemsimError):
    """An input value lies outside its admissible domain."""


class DimensionError(HemsimError):
    """Array or series lengths are inconsistent."""


class NumericalError(HemsimError):
    """A numerical routine lost the properties it relies on."""


class CovarianceError(NumericalError):
    """A covariance/correlation matrix could not be regularized to SPD."""


# -- forecasting --------------------------------------------------------------

class ColdStartError(HemsimError):
    """The forecaster was queried before its warm-up requirement was met."""


class EmptyMarginal(HemsimError):
    """An empirical marginal has too few support points to invert."""


# -- optimization -------------------------------------------------------------

class SolverError(HemsimError):
    """The optimizer failed in a way that is not an infeasibility verdict."""


# -- CLI ----------------------------------------------------------------------

class UsageError(HemsimError):
    """Bad command line; maps to exit code 2."""


class ConfigError(HemsimError):
    """Bad or inconsistent run configuration; maps to exit code 3."""


class DataError(HemsimError):
    """Runtime data problem surfaced by the CLI; maps to exit code 4."""
