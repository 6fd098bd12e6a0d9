"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes, so new failure modes should
subclass one of the three branches below rather than raising bare
exceptions.
"""

from __future__ import annotations


class ReltraceError(Exception):
    """Base class for all package-specific failures."""


class ConfigError(ReltraceError):
    """Invalid configuration: unknown keys, bad values, inconsistent options."""


class FormatError(ReltraceError):
    """A file does not conform to its expected on-disk format.

    Carries enough position information (line number or byte offset) to
    locate the offending input.
    """

    def __init__(self, message: str, *, path: str | None = None,
                 line: int | None = None, offset: int | None = None):
        self.path = path
        self.line = line
        self.offset = offset
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte {offset}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class NumericalError(ReltraceError):
    """A numerical procedure could not produce a valid result."""


class RankDeficiencyError(NumericalError):
    """The regression normal equations are singular.

    Raised instead of silently falling back to a pseudo-inverse; the fix is
    almost always a positive regularization strength.
    """


class EmptyDesignError(NumericalError):
    """No usable training rows remain after vocabulary filtering."""
