"""Exception types shared across the package."""


class TomographyError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(TomographyError):
    """Operands act on incompatible spaces."""


class DomainError(TomographyError):
    """Argument outside the supported domain."""


class InvalidOperator(TomographyError):
    """Matrix fails a Hermiticity, positivity, trace, or normalization check."""


class NotTriangular(TomographyError):
    """State does not have upper-triangular support with the real pattern."""


class NotRegularTriangular(TomographyError):
    """Triangular state violates the regularity (non-collinearity) conditions."""


class DegeneratePencil(TomographyError):
    """The pencil A - x*B is rank deficient or has coincident roots."""


class ConvergenceFailure(TomographyError):
    """An iterative decomposition exhausted its budget."""


class InconsistentRdms(TomographyError):
    """The two reduced operators disagree on their shared marginal."""


class NonUniqueSuspect(TomographyError):
    """Reconstruction could not assemble a unique candidate state."""


class PivotFailure(TomographyError):
    """No pivot row admits a full set of two-row slice reconstructions."""


class RdmMismatch(TomographyError):
    """Candidate operator does not match the reference reduced states."""


class IncompleteBasis(TomographyError):
    """Expectation records do not cover a complete product basis."""


class ManifestError(TomographyError):
    """Array file manifest is malformed or does not match its payload."""
