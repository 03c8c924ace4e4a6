"""Exception hierarchy shared by all gdfpca modules.

Data problems (bad CSV cells, shape mismatches) and numerical failures
(solver breakdown, phase-alignment residue) are kept on separate branches
so the command-line driver can map them to distinct exit codes.
"""


class GDFPCAError(Exception):
    """Base class for all errors raised by gdfpca."""


class ConfigError(GDFPCAError):
    """Invalid configuration or unusable parameter combination."""


class DataError(GDFPCAError):
    """Problems with input data (shapes, missing cells, parsing)."""


class InvalidInputError(DataError):
    """Arguments violate a documented precondition."""


class InsufficientDataError(DataError):
    """Too few observations for the requested operation."""


class MissingDataError(DataError):
    """A dense panel has absent cells; sparse designs are not supported."""


class CSVParseError(DataError):
    """Malformed CSV input; carries the offending line number in the message."""


class NumericalError(GDFPCAError):
    """A numerical procedure failed to produce a usable result."""


class PhaseAlignmentError(NumericalError):
    """Eigenfunction phases could not be aligned; filters would not be real."""


class SolverError(NumericalError):
    """An iterative solver diverged or hit an internal inconsistency."""


class DegeneratePrecisionError(NumericalError):
    """A precision matrix is singular where a positive definite one is required."""
