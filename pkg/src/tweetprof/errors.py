"""Exception types shared across the package."""


class TweetprofError(Exception):
    """Base class for all package-specific errors."""


class ParseError(TweetprofError, ValueError):
    """A line in an input file could not be parsed; carries the line number."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class SchemaError(TweetprofError, ValueError):
    """A record refers to a label or class unknown to the active scheme."""


class IntegrityError(TweetprofError, ValueError):
    """A dataset invariant is violated (e.g. duplicate tweet id)."""


class ConfigError(TweetprofError, ValueError):
    """A configuration value is out of range or internally inconsistent."""


class FormatError(TweetprofError, ValueError):
    """An external file does not follow its declared format."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class InputError(TweetprofError, ValueError):
    """An operation was called with arguments outside its domain."""


class ShapeError(TweetprofError, ValueError):
    """Feature vectors or matrices have inconsistent dimensions."""


class NumericError(TweetprofError, ArithmeticError):
    """A computation produced a non-finite intermediate value."""


class TrainingError(NumericError):
    """Training diverged; carries the epoch and batch where it happened."""

    def __init__(self, message: str, epoch: int, batch: int):
        super().__init__(f"epoch {epoch}, batch {batch}: {message}")
        self.epoch = epoch
        self.batch = batch
