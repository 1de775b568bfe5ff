"""Exception types shared across the package."""


class ReplaywmError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(ReplaywmError):
    """Operands or config entries have incompatible shapes."""


class NotPositiveDefinite(ReplaywmError):
    """A matrix required to be (semi)definite failed a factorization."""


class NonConvergence(ReplaywmError):
    """An iterative solver hit its iteration cap before meeting tolerance."""


class UnstableMatrix(ReplaywmError):
    """Spectral radius at or above one where strict stability is required."""


class UnstableClosedLoop(ReplaywmError):
    """The designed closed loop is not strictly stable."""


class InvalidAttackWindow(ReplaywmError):
    """Replay parameters would read observations that were never recorded."""


class ZeroDivergence(ReplaywmError):
    """KLD is numerically zero; the attack is asymptotically undetectable."""


class DegenerateSystem(ReplaywmError):
    """All leading Markov parameters vanish; relative degree undefined."""


class DegenerateDirection(ReplaywmError):
    """Watermark direction carries no control cost; cannot scale to budget."""


class NoImprovement(ReplaywmError):
    """No optimizer start beat the equal-power diagonal baseline."""


class StreamExhausted(ReplaywmError):
    """A finite record stream ended before the detector alarmed."""


class AllFalseAlarms(ReplaywmError):
    """Every Monte Carlo trial alarmed before the attack started."""


class ParseError(ReplaywmError):
    """A system-definition file is malformed."""


class MissingKey(ParseError):
    """A required key is absent from a system-definition file."""

    def __init__(self, key: str):
        super().__init__(f"missing required key {key!r}")
        self.key = key
