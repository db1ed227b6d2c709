"""Exception hierarchy shared by all eddymodes modules.

Two broad families matter for the CLI exit-code contract: input problems
(bad files, bad arguments, invariant violations) and numerical failures
(non-physical models, solver breakdown).
"""


class EddymodesError(Exception):
    """Base class for every error raised by this package."""


class InputError(EddymodesError):
    """Bad file content, bad arguments, or violated model invariants."""


class NumericalError(EddymodesError):
    """Solver breakdown or a non-physical model detected numerically."""


# --- input-side errors ------------------------------------------------------

class ParseError(InputError):
    """Malformed model/drive/cache text. Carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(InputError):
    """A structural invariant of a model or spec does not hold."""


class InvalidGeometry(InputError):
    """Degenerate geometric input (zero lengths, radius out of range, ...)."""


class ElectrodeOverlap(InputError):
    """Electrode node sets are not pairwise disjoint."""


class Disconnected(InputError):
    """The branch graph is not connected."""


class DimensionMismatch(InputError):
    """Array arguments have inconsistent shapes."""


class IndexMismatch(InputError):
    """Two keyed collections do not share the same index set."""


class NonintegerPeriods(InputError):
    """Analysis window does not span an integer number of tone periods."""


class NyquistViolation(InputError):
    """Requested tone frequency is at or above the Nyquist limit."""


class ProbeTooClose(InputError):
    """A field probe lies on or inside a filament."""


# --- numerical errors -------------------------------------------------------

class NotPositiveDefinite(NumericalError):
    """Cholesky pivot <= 0. Signals zero/negative resistivity or degenerate
    geometry. Carries the failing pivot index."""

    def __init__(self, pivot: int, what: str = "matrix"):
        self.pivot = pivot
        super().__init__(f"{what} is not positive definite (pivot {pivot} <= 0)")


class NoConvergence(NumericalError):
    """Iterative eigensolver exceeded its sweep limit."""


class SingularPair(NumericalError):
    """Mutual-inductance integral requested for overlapping segments."""


class SingularSystem(NumericalError):
    """Dense LU hit an exactly zero pivot."""


class RankDeficient(NumericalError):
    """Electrode incidence matrix is rank deficient (degenerate electrodes)."""
