"""Exception taxonomy and process exit codes."""

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


class ConfigError(ValueError):
    """Invalid or inconsistent configuration; raised before any work starts."""


class DataError(ValueError):
    """Input data violates a format, range, or dimension contract."""


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name for diagnostics."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
