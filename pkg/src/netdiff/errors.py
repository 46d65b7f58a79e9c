"""
Exceptions raised by netdiff and the exit codes the command line maps them to.
"""

from typing import Optional

EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_INVARIANT_VIOLATION = 3


class NetdiffInputError(ValueError):
    """Invalid user input: files, dimensions, parameter ranges or configuration."""


class StackFormatError(NetdiffInputError):
    """A network stack file does not match its declared format."""


class InvariantViolationError(RuntimeError):
    """An internal consistency check failed."""


class ReplicationError(RuntimeError):
    """A simulation replication failed. The original exception is chained as __cause__."""

    def __init__(self, index: int, message: str):
        super().__init__(f"Replication {index} failed: {message}")
        self.index = index


def exit_code_for(error: BaseException) -> Optional[int]:
    """
    Map an exception to the command line exit code, None if the exception is not an expected one.

    Replication errors are mapped by their cause.
    """
    if isinstance(error, ReplicationError) and error.__cause__ is not None:
        return exit_code_for(error.__cause__)
    if isinstance(error, InvariantViolationError):
        return EXIT_INVARIANT_VIOLATION
    if isinstance(error, (NetdiffInputError, OSError)):
        return EXIT_INPUT_ERROR
    return None
