"""Exception types shared across the toolkit.

Two failure classes matter at the CLI boundary: bad inputs (exit code 1)
and numerical breakdowns (exit code 2). Everything raised on purpose in
this package derives from one of them.
"""


class SemshockError(Exception):
    """Base class for all toolkit errors."""


class InputError(SemshockError):
    """Fatal input or configuration problem (CLI exit code 1)."""


class NumericError(SemshockError):
    """Fatal numerical failure, e.g. a singular or non-finite solve (CLI exit code 2)."""
