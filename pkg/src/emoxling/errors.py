"""Exception hierarchy shared by every module."""


class EmoxlingError(Exception):
    """Base class for all toolkit errors."""


class MissingColumn(EmoxlingError):
    pass


class MalformedLabel(EmoxlingError):
    pass


class MalformedLine(EmoxlingError):
    pass


class DuplicateId(EmoxlingError):
    pass


class EmptyText(EmoxlingError):
    pass


class EmptySide(EmoxlingError):
    pass


class UnknownLabel(EmoxlingError):
    pass


class ProbabilityOutOfRange(EmoxlingError):
    pass


class RowWidthMismatch(EmoxlingError):
    pass


class IdMismatch(EmoxlingError):
    pass


class EmptyCorpus(EmoxlingError):
    pass


class DimensionMismatch(EmoxlingError):
    pass


class EmptyTrainingSet(EmoxlingError):
    pass


class NonFiniteLoss(EmoxlingError):
    pass


class MissingEmbedding(EmoxlingError):
    pass


class PredictorFailure(EmoxlingError):
    pass


class ConfigInvalid(EmoxlingError):
    pass


class StageError(EmoxlingError):
    """Wraps an error raised inside one stage of an experiment run."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
