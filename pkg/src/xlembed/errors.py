"""Exception types shared across the toolkit.

Everything raised on bad user input derives from ToolkitError so the CLI
can map it to a single "data/validation" exit code.
"""

from __future__ import annotations


class ToolkitError(Exception):
    """Base class for all errors raised by this package on bad input."""


class FormatError(ToolkitError):
    """A file on disk does not match its documented format."""


class ValidationError(ToolkitError):
    """Inputs are well-formed but violate a documented precondition."""
