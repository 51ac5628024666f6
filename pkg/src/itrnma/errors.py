"""Exception hierarchy shared across the pipeline."""


class ItrNmaError(Exception):
    """Base class for all pipeline errors."""


class SchemaError(ItrNmaError):
    """A term references an unknown covariate or the data violates the schema."""


class DegenerateArmError(ItrNmaError):
    """A study arm has no usable rows."""


class MappingError(ItrNmaError):
    """A study arm refers to a treatment missing from the registry."""


class DisconnectedNetworkError(ItrNmaError):
    """The treatment network is not connected."""


class SingularDesignError(ItrNmaError):
    """Design matrix is rank deficient on the weighted support."""


class IdentifiabilityError(ItrNmaError):
    """The pooled precision matrix is singular; some contrasts are unestimable."""


class ProfileError(ItrNmaError):
    """A covariate profile does not match the effect-modifier schema."""


class ScoringError(ItrNmaError):
    """Performance measures requested with no converged replications."""


class IngestionError(ItrNmaError):
    """A data file could not be parsed into a study dataset."""


class ConfigError(ItrNmaError):
    """Run configuration is invalid or inconsistent."""
