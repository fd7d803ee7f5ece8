"""Exception hierarchy shared by every module."""

from __future__ import annotations


class TapError(Exception):
    """Base class for all errors raised by this package."""


class InputError(TapError, ValueError):
    """Malformed instance, parameter or file."""


class InfeasibleError(TapError):
    """No feasible cover (or LP point) exists."""


class UnboundedError(TapError):
    """An LP is unbounded below."""


class SizeLimitError(TapError):
    """An exact routine refused to run because the input exceeds a configured bound."""


class InvariantViolation(TapError):
    """A proven guarantee failed at runtime. Always a bug."""
