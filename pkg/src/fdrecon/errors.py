"""Exception hierarchy shared by all modules."""


class FDReconError(Exception):
    """Base class for all library errors."""


class StructuralError(FDReconError, ValueError):
    """Shapes or lengths of inputs do not agree."""


class EmptySection(FDReconError):
    """No curve is observed at the requested grid point."""


class EmptyCurve(FDReconError):
    """The focal curve has no observed grid points."""


class NoCandidates(FDReconError):
    """No other curve has a defined distance to the focal curve."""


class NoEnvelope(FDReconError):
    """An estimator was requested from an empty envelope."""


class ConfigError(FDReconError, ValueError):
    """Infeasible or invalid configuration."""


class NumericalError(FDReconError, ArithmeticError):
    """A numerical routine failed (e.g. a kernel matrix could not be factorized)."""


class MalformedCSV(FDReconError, ValueError):
    """A wide CSV file could not be parsed."""
