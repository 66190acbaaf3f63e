"""Exception hierarchy; the CLI maps each class to its own exit code."""


class NsFilterError(Exception):
    exit_code = 1


class ConfigError(NsFilterError, ValueError):
    exit_code = 2


class MissingInputError(NsFilterError, FileNotFoundError):
    exit_code = 3


class SchemaError(NsFilterError, ValueError):
    exit_code = 4


class BlowUpError(NsFilterError, FloatingPointError):
    """Non-finite values in the forward model; ``step`` is the offending step index."""

    exit_code = 5

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step
