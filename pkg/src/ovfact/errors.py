"""Exception hierarchy.

The CLI maps these onto process exit codes, so the split mirrors the failure
surfaces an operator cares about: bad configuration, bad input data, a
misbehaving backend, and a scoring run whose failure fraction crossed the
configured ceiling.
"""

from __future__ import annotations


class OvfactError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(OvfactError):
    """Invalid or inconsistent run configuration (CLI exit code 1)."""


class DataError(OvfactError):
    """Malformed or missing input data (CLI exit code 2)."""


class NormalizationError(DataError):
    """A raw entity phrase could not be normalized (e.g. empty after trim)."""


class UndefinedRateError(DataError):
    """An agreement rate whose denominator is empty after exclusions."""


class BackendError(OvfactError):
    """A model backend failed (CLI exit code 3).

    ``retryable`` tells the caller whether a retry could plausibly succeed;
    transport hiccups are retryable, contract violations are not.
    """

    retryable = False


class TransportError(BackendError):
    """Network-level failure or a server-declared retryable error."""

    retryable = True


class ProtocolError(BackendError):
    """The backend answered, but the response violates the wire contract."""


class FixtureMissError(BackendError):
    """A fixture backend has no record for the requested key.

    Misses are hard errors so that a test can never pass vacuously against
    an incomplete fixture file.
    """


class FailureCeilingExceeded(OvfactError):
    """Too many per-sample failures in one scoring run (CLI exit code 4)."""

    def __init__(self, failed: int, total: int, ceiling: float):
        self.failed = failed
        self.total = total
        self.ceiling = ceiling
        super().__init__(
            f"{failed}/{total} samples failed "
            f"({failed / total:.2%} > ceiling {ceiling:.2%})"
        )
