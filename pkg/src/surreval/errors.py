"""Exception taxonomy shared across the package.

ConfigError maps to CLI exit code 2, everything else to 3.
"""


class SurrevalError(Exception):
    """Base class for all package errors."""


class ConfigError(SurrevalError):
    """Invalid configuration (bad dimensions, fractions, paths, ranges)."""


class InputError(SurrevalError):
    """Malformed call arguments: shape mismatch, non-finite values, bad domain."""


class DegenerateInputError(SurrevalError):
    """Data on which the requested quantity is undefined (single-class labels,
    zero-variance targets, and similar)."""


class EncodingError(SurrevalError):
    """Agent does not fit the fixed-width vector layout of its space."""


class NumericError(SurrevalError):
    """Numerical failure, e.g. a singular normal-equation system."""


class RoutingError(SurrevalError):
    """No sub-model available for a subject type at inference time."""


class IngestionError(SurrevalError):
    """CSV ingestion failure, with row/column diagnostics in the message."""


class PartitionError(SurrevalError):
    """A data partition required by a statistical test came out empty."""
