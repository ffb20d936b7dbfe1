"""Exception hierarchy shared by every module."""


class QsdseError(Exception):
    """Base class for all errors raised by this package."""


# network construction
class NonIntegerChannels(QsdseError, ValueError):
    pass


class InvalidShape(QsdseError, ValueError):
    pass


# accelerator model
class NotHardwareFriendly(QsdseError, ValueError):
    pass


class UnsupportedLayer(QsdseError, ValueError):
    pass


class NonPositiveEnergy(QsdseError, ValueError):
    pass


# surrogate fitting
class FitError(QsdseError):
    """Raised when a regression cannot produce a usable model."""


class TooFewPoints(FitError, ValueError):
    pass


class RankDeficient(FitError):
    pass


class DenominatorVanishes(FitError):
    pass


class EmptySamples(QsdseError, ValueError):
    pass


# surrogate evaluation
class PoleAtPoint(QsdseError, ArithmeticError):
    pass


class Infeasible(QsdseError, ValueError):
    pass


class SingularInversion(QsdseError, ArithmeticError):
    pass


class EmptyContour(QsdseError, ValueError):
    pass


# exploration
class EmptyGrid(QsdseError, ValueError):
    pass


class EmptyInput(QsdseError, ValueError):
    pass


# file ingestion
class SampleFileError(QsdseError, ValueError):
    """A problem in an input file, located by path/row/column."""

    def __init__(self, message, path=None, row=None, col=None):
        self.path = str(path) if path is not None else None
        self.row = row
        self.col = col
        loc = []
        if self.path is not None:
            loc.append(self.path)
        if row is not None:
            loc.append(f"row {row}")
        if col is not None:
            loc.append(f"column {col}")
        prefix = ":".join(loc)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class MissingHeader(SampleFileError):
    pass


class BadNumeric(SampleFileError):
    pass


class OutOfRange(SampleFileError):
    pass


class InconsistentEnergy(SampleFileError):
    pass


class ExtrapolationWarning(UserWarning):
    """A prediction was made outside the fitted sample domain or is unphysical."""
