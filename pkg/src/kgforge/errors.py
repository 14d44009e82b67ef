"""Exception hierarchy shared by every kgforge module."""


class KGError(Exception):
    """Base class for all kgforge errors."""


class InvalidInputError(KGError, ValueError):
    pass


class NotFoundError(KGError, LookupError):
    pass


class ParseError(KGError):
    """A line of an input file or stream could not be parsed."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        self.reason = message
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class UndefinedMetricError(KGError, ValueError):
    """A metric is mathematically undefined for the given arguments."""


class TransportError(KGError):
    """Network failure talking to an extraction endpoint, after retries."""


class EndpointError(KGError):
    def __init__(self, status: int, body: str = ""):
        self.status = status
        self.body = body
        super().__init__(f"extraction endpoint returned HTTP {status}")


class TrainingDivergedError(KGError):
    """Raised when the training loss stops being finite."""

    def __init__(self, epoch: int, batch: int, loss: float):
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
        super().__init__(f"non-finite loss {loss!r} at epoch {epoch}, batch {batch}")
