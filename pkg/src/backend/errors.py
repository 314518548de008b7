"""
DigiWFS Unwrap - Error types

Every failure the toolkit reports on purpose derives from DWFSError. The
command line maps the ``exit_code`` attribute straight to the process status.

Classes:
    DWFSError: Base class
    UsageError: Bad method name, parameter or config key (exit 1)
    GridIOError: Unreadable or unwritable grid files (exit 2)
    GridValidationError: Numerically invalid input (exit 3)
"""

from typing import Optional


class DWFSError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class UsageError(DWFSError, ValueError):
    """
    Invalid method, parameter or configuration key.

    Args:
        message (str): Human readable description
        key (str, optional): The offending key, reported by the CLI
    """

    exit_code = 1

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class GridIOError(DWFSError, OSError):
    """Grid file could not be read or written."""

    exit_code = 2


class GridValidationError(DWFSError, ValueError):
    """Input failed a numerical validation check."""

    exit_code = 3
