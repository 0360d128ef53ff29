class SamplerError(Exception):
    """Base class for every failure raised by the sampling library."""


class DimensionError(SamplerError, ValueError):
    """State / vector lengths disagree, or an index is out of range."""


class ModelFormatError(SamplerError, ValueError):
    """Malformed model or weight file."""


class InvalidParameterError(SamplerError, ValueError):
    """A parameter violates its documented constraints."""


class EmptySupportError(SamplerError, ValueError):
    """Weighted draw requested from a distribution with zero total mass."""


class OracleBudgetError(SamplerError):
    """Exact enumeration would exceed its work budget."""


class GpFitError(SamplerError):
    """Covariance matrix could not be factorized even after jitter escalation."""


class ConfigError(SamplerError, ValueError):
    """Experiment configuration is invalid or inconsistent."""


class VerificationError(SamplerError):
    """One or more correctness checks failed."""
