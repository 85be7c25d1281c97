"""Exception types shared across the package."""


class NumericFailure(RuntimeError):
    """A linear-algebra or kernel evaluation produced unusable numbers
    (non-finite covariance, Cholesky failure after jitter escalation)."""


class SamplerStuck(RuntimeError):
    """The slice sampler shrank its bracket past the retry limit without
    finding an acceptable point."""


class ConfigError(ValueError):
    """An experiment configuration file is malformed or inconsistent."""


class GroundTruthError(ValueError):
    """An observed value undercuts the registered benchmark minimum by more
    than numerical tolerance."""
