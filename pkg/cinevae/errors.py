"""Exception hierarchy and CLI exit codes."""

from typing import Optional

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class CineVAEError(Exception):
    """Base class for every error raised on purpose by cinevae."""

    exit_code = EXIT_RUNTIME


class ConfigError(CineVAEError):
    """Invalid configuration: unknown key, bad type, violated invariant."""

    exit_code = EXIT_USAGE

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class RejectedInputError(CineVAEError, ValueError):
    """An operation received input outside its preconditions."""


class DegenerateInputError(CineVAEError, ValueError):
    """Input is well-formed but statistically degenerate (single class, empty group)."""


class DatasetFormatError(CineVAEError, ValueError):
    """Dataset container is corrupt or has an unexpected header."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"dataset format error in '{field}': {message}")


class DependencyError(CineVAEError):
    """A pipeline phase ran before the phase producing its inputs."""

    def __init__(self, phase: str, message: str):
        self.phase = phase
        super().__init__(message)


class LockError(CineVAEError):
    """Another orchestrator holds the experiment directory."""


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the stable CLI exit code."""
    if isinstance(exc, CineVAEError):
        return exc.exit_code
    return EXIT_RUNTIME
