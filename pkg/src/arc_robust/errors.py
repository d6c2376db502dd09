"""Exception hierarchy shared by every module."""


class ArcRobustError(ValueError):
    """Base class for all errors raised by this package."""


class NonFiniteInput(ArcRobustError):
    pass


class DimensionMismatch(ArcRobustError):
    pass


class InsufficientWorkers(ArcRobustError):
    pass


class TooManyByzantine(ArcRobustError):
    pass


class NegativeThreshold(ArcRobustError):
    pass


class EmptyGrid(ArcRobustError):
    pass


class NoHonestWorkers(ArcRobustError):
    pass


class LabelOutOfRange(ArcRobustError):
    pass


class EmptyWorkerRetry(ArcRobustError):
    pass


class BadMagic(ArcRobustError):
    pass


class CountMismatch(ArcRobustError):
    pass


class Truncated(ArcRobustError):
    pass


class DivergenceGuard(ArcRobustError):
    pass


class UnknownLipschitz(ArcRobustError):
    pass


class TooManySubsets(ArcRobustError):
    pass


class AllClipped(ArcRobustError):
    pass


class ParameterDomain(ArcRobustError):
    pass


class ConfigError(ArcRobustError):
    """Malformed configuration; carries an optional line number and field name."""

    def __init__(self, message, *, line=None, field=None):
        self.message = message
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
