"""Exception and warning types shared across the package."""


class ChronoflowError(Exception):
    """Base class for all package errors."""


class SchemaError(ChronoflowError):
    """A value violates a declared structural constraint."""


class ParseError(ChronoflowError):
    """An input file could not be parsed."""


class DuplicateTimestampError(ParseError):
    """Two observations share a (series, time) pair."""


class NumericalError(ChronoflowError):
    """A numerical routine failed to meet its accuracy contract."""


class NoUniqueStationaryError(NumericalError):
    """The transition kernel is reducible; no unique stationary law exists."""


class NotPrimitiveError(NumericalError):
    """The projection matrix is not primitive; no stable structure exists."""


class EmptyEnsembleError(ChronoflowError):
    """An ensemble specification produces no series."""


class UnsupportedNodeError(ChronoflowError):
    """A field was evaluated at a node with no data support."""


class NonConvergenceWarning(UserWarning):
    """An iterative optimizer stopped at its iteration cap."""


class NonIdentifiableWarning(UserWarning):
    """The data do not constrain the parameters being fitted."""
