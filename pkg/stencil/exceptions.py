import typing as t


class StencilError(Exception):
    """Root of every error raised by the package. The CLI maps it to an exit code."""

    exit_code: int = 1

    def __init__(self, message: str, details: t.Any = None) -> None:
        super().__init__(message)
        self.message = message
        self.details = details

    def to_response(self):
        return {
            'error': type(self).__name__,
            'message': self.message,
            'details': self.details
        }


# Usage (exit code 1).
class UsageError(StencilError):
    exit_code = 1


class ContractError(UsageError):
    """A precondition of an operation was violated."""


class DimensionError(ContractError):
    """Tensor or array extents do not agree."""


class MaskedRowError(ContractError):
    """A softmax row has no finite entry (every token masked at a position)."""


class MissingConceptError(UsageError):
    def __init__(self, class_id: int):
        super().__init__(f'No concept for class id {class_id}.', details={'class_id': class_id})
        self.class_id = class_id


class PromptOverflowError(UsageError):
    def __init__(self, token_count: int, max_length: int):
        super().__init__(
            f'Prompt needs {token_count} tokens but the maximum length is {max_length}.',
            details={'token_count': token_count, 'max_length': max_length}
        )


class OutOfVocabularyError(UsageError):
    def __init__(self, word: str):
        super().__init__(f'Out-of-vocabulary word: "{word}".', details={'word': word})
        self.word = word


class ConfigError(UsageError):
    pass


# I/O (exit code 2).
class StencilIOError(StencilError):
    exit_code = 2


class FormatError(StencilIOError):
    """A file does not follow its expected binary format."""


# Numerical (exit code 3).
class TrainingDivergenceError(StencilError):
    exit_code = 3
