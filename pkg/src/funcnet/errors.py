"""Exception hierarchy shared across the package."""


class FuncnetError(Exception):
    """Base class for all funcnet errors."""


class InvalidGrid(FuncnetError):
    pass


class DimensionMismatch(FuncnetError):
    pass


class TooFewSubjects(FuncnetError):
    pass


class NotCentered(FuncnetError):
    pass


class InvalidPair(FuncnetError):
    pass


class NumericalDegeneracy(FuncnetError):
    pass


class DegenerateNull(FuncnetError):
    pass


class InvalidStatistic(FuncnetError):
    pass


class InvalidArgument(FuncnetError):
    pass


class InvalidLevel(FuncnetError):
    pass


class NoData(FuncnetError):
    pass


class PipelineOrderError(FuncnetError):
    pass


class DegenerateVariable(FuncnetError):
    pass


class NotPSD(FuncnetError):
    pass


class NotADAG(FuncnetError):
    pass


class PowerUndefined(FuncnetError):
    pass
