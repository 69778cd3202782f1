"""Exception hierarchy shared across the package."""


class DeepGreedyError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(DeepGreedyError, ValueError):
    pass


class InvalidStateError(DeepGreedyError, RuntimeError):
    pass


class DomainError(DeepGreedyError, ValueError):
    """A bound was evaluated outside the range where its formula is defined."""


class ConfigError(DeepGreedyError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TrainingDivergedError(DeepGreedyError, ArithmeticError):
    pass


class InvariantViolationError(DeepGreedyError, RuntimeError):
    pass


class IdxFormatError(DeepGreedyError, ValueError):
    """Wrong magic number or malformed IDX header."""


class IdxTruncationError(IdxFormatError):
    pass


class IdxRangeError(IdxFormatError):
    pass
