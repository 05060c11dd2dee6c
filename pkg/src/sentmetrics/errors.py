"""Exception hierarchy shared across the package.

Plain ``ValueError`` is used for mathematical domain violations (negative
probabilities, dimension mismatches, out-of-span covariates); the classes
here cover file formats, the backend wire protocol, and model fitting.
"""


class SentmetricsError(Exception):
    """Base class for package-specific failures."""


class FormatError(SentmetricsError):
    """An input file does not match its documented layout."""


class EmptyInputError(FormatError):
    """An input file contains no usable content."""


class ValidationError(SentmetricsError):
    """A protocol message or configuration violates its invariants."""


class ProtocolError(SentmetricsError):
    """A wire message could not be interpreted (bad JSON, unknown kind)."""


class TransportError(SentmetricsError):
    """The backend could not be reached or timed out; safe to retry."""


class ScoringError(SentmetricsError):
    """The backend reported a terminal model-side failure."""


class CapabilityError(SentmetricsError):
    """The backend does not support the requested operation."""


class NumericalError(SentmetricsError):
    """A linear system was singular or too ill-conditioned to solve."""


class ComparisonError(SentmetricsError):
    """Two fits were compared on mismatched row sets."""


class UndefinedCorrelationError(SentmetricsError):
    """Correlation is undefined (constant input or too few pairs)."""


class EvaluationError(SentmetricsError):
    """A model could not be evaluated (for example, too few rows)."""
