"""Exception hierarchy for the QAG toolkit."""


class QAGError(Exception):
    """Base class for all toolkit errors."""

    pass


class SimulationError(QAGError, ValueError):
    """Raised for invalid gates, states or sampling requests."""

    pass


class CircuitError(QAGError, ValueError):
    """Raised when an architecture cannot be built or transformed."""

    pass


class EncodingError(QAGError, ValueError):
    """Raised for invalid encoding configs, latent draws or counts."""

    pass


class LossError(QAGError, ValueError):
    """Raised when a loss is undefined for the given batches."""

    pass


class TrainingError(QAGError, ValueError):
    """Raised for invalid training configs or trial requests."""

    pass


class DatasetError(QAGError, ValueError):
    """Raised for malformed dataset files or impossible splits."""

    pass


class ConfigError(QAGError, ValueError):
    """Raised for invalid run configuration."""

    pass


class CheckpointError(QAGError, ValueError):
    """Raised when a checkpoint is missing or inconsistent."""

    pass


class EvaluationError(QAGError, ValueError):
    """Raised when an accuracy metric is undefined for the given batches."""

    pass
