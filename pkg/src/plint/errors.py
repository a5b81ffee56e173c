"""Exception hierarchy for the engine, the expression language and the CLI."""

from __future__ import annotations


class PlintError(Exception):
    """Base class for every error raised by this package."""


# ---------------------------------------------------------------- pmf / ops

class EmptyVector(PlintError):
    """A mass vector was constructed with no entries."""


class NegativeMass(PlintError):
    """A mass vector was constructed with a negative entry."""


class AllZeroMass(PlintError):
    """An operation that needs positive total mass received only zeros."""


class InvalidRange(PlintError):
    """Range bounds are inverted or otherwise unusable."""


class InvalidDivisor(PlintError):
    """Integer division or modulo by a non-positive constant."""


class IntegerOverflow(PlintError):
    """An offset or support bound left the signed 64-bit range."""


class DimensionOverflow(PlintError):
    """An operation would produce a mass vector above the configured cap."""


# ---------------------------------------------------------------- fft

class NonPowerOfTwoLength(PlintError):
    """Transform buffer length is not a power of two."""


class NumericalBlowup(PlintError):
    """The inverse transform produced a negative value too large to clamp."""


# ---------------------------------------------------------------- autodiff

class UnrecordedNode(PlintError):
    """A gradient was requested for a node or leaf not on the tape."""


class NonScalarQuery(PlintError):
    """grad() needs a scalar query node, not a distribution-valued one."""


class UnreachableLabel(PlintError):
    """A training label lies outside the reachable range of the sum."""


# ---------------------------------------------------------------- oracle

class StateSpaceTooLarge(PlintError):
    """Joint outcome space exceeds the enumeration cap."""


# ---------------------------------------------------------------- language

class SourceError(PlintError):
    """An error anchored to a position in DSL source text."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.message = message
        self.line = line
        self.col = col
        super().__init__(str(self))

    def __str__(self) -> str:
        if self.line is None:
            return self.message
        return f"{self.line}:{self.col}: {self.message}"


class DslSyntaxError(SourceError):
    """Malformed DSL source."""


class DuplicateName(SourceError):
    """A pint or let name was declared twice."""


class UnknownName(SourceError):
    """A name was referenced before being declared or bound."""


class EvalError(SourceError):
    """An engine error raised while evaluating a statement or query."""


# ---------------------------------------------------------------- cli

class CsvWriteError(PlintError):
    """Benchmark CSV output could not be written."""
