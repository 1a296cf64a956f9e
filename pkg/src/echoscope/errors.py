"""Exception types shared across the pipeline."""


class EchoscopeError(Exception):
    """Base class for all pipeline errors."""


class ConfigurationError(EchoscopeError):
    """Invalid or inconsistent run configuration."""


class ParseError(EchoscopeError):
    """Malformed input record (carries the source line number when known)."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class RatingsError(EchoscopeError):
    """Malformed or contradictory source-ratings table."""


class EmptyCorpusError(EchoscopeError):
    """Nothing survived parsing or pruning."""


class ProviderError(EchoscopeError):
    """Embedding/stance provider returned an unusable response."""


class ProviderTransportError(ProviderError):
    """Remote provider unreachable after retries."""


class SingularSystemError(EchoscopeError):
    """The regularized least-squares system could not be solved."""


class ClusteringError(EchoscopeError):
    """Clustering preconditions not met (too few points for the scan range)."""


class MissingArtifactError(EchoscopeError):
    """A stage was resumed but a required upstream artifact is absent."""


class StatisticError(EchoscopeError):
    """A requested statistic is undefined for the given sample."""
