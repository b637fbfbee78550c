import logging

from django.core.management.base import CommandError

from .exceptions import (
    ArtifactIOError,
    ConfigValidationError,
    InputDataError,
    LatticeSnnError,
)

logger = logging.getLogger(__name__)

SUCCESS = 0
VALIDATION = 1
RUNTIME = 2
IO = 3


def exit_code_for(exc):
    """Map an exception to the CLI exit code contract."""
    if isinstance(exc, ConfigValidationError):
        return VALIDATION
    if isinstance(exc, (ArtifactIOError, OSError)):
        return IO
    if isinstance(exc, InputDataError):
        # Unreadable or malformed input files are I/O problems for the caller
        return IO
    return RUNTIME


def as_command_error(exc):
    """
    Wrap any exception raised inside a management command into a
    CommandError carrying the right return code.
    """
    code = exit_code_for(exc)
    if isinstance(exc, ConfigValidationError):
        message = 'Invalid configuration:\n  ' + '\n  '.join(exc.errors)
    elif isinstance(exc, LatticeSnnError):
        message = f"{type(exc).__name__}: {exc}"
    else:
        logger.error(f"Unhandled exception: {exc}", exc_info=True)
        message = f"{type(exc).__name__}: {exc}"
    return CommandError(message, returncode=code)
