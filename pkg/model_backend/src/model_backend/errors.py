class ModelBackendError(Exception):
    """Base class for trainer and inference-service failures."""


class CorpusTooLong(ModelBackendError):
    """A corpus record exceeds the configured token-length caps."""


class BadCorpus(ModelBackendError):
    """The corpus file is missing or malformed."""
