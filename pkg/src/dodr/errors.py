"""Exception types raised across the package."""


class InvalidInputError(ValueError):
    """Input violates a documented precondition (shape, range, finiteness)."""


class UndefinedMetricError(ValueError):
    """A metric is mathematically undefined for the given inputs."""


class DataFormatError(ValueError):
    """A feature file could not be parsed or failed validation."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TrainingDivergedError(RuntimeError):
    """The training objective became non-finite."""

    def __init__(self, epoch, batch, value):
        super().__init__(
            f"non-finite loss {value!r} at epoch {epoch}, batch {batch}"
        )
        self.epoch = epoch
        self.batch = batch
        self.value = value
