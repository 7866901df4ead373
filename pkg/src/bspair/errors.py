"""Exception hierarchy shared by all submodules."""


class BsPairError(Exception):
    """Base class for every error raised by :mod:`bspair`."""


class DomainError(BsPairError, ValueError):
    """A point lies outside the domain an operation is defined on."""


class UndefinedCorridorError(BsPairError, ValueError):
    pass


class DegenerateTangentError(BsPairError, ValueError):
    pass


class InvalidPairError(BsPairError, ValueError):
    """Two arcs violate the hypotheses of the classifier."""


class IntegrabilityError(BsPairError, ValueError):
    pass


class CarlesonViolationError(BsPairError, ValueError):
    pass


class GeometryError(BsPairError, ValueError):
    """Density support or corridor does not have the required shape."""


class SeparationError(BsPairError, ValueError):
    """Singular sets are not separated by the corridor of a cutting function."""


class ConstructionError(BsPairError, ValueError):
    pass


class InvalidCellError(BsPairError, ValueError):
    pass


class AmbiguityError(BsPairError, ValueError):
    """Boundary evaluation requested on an arc without choosing a side."""


class ScheduleInfeasibleError(BsPairError, ValueError):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class ContainmentError(BsPairError, ValueError):
    pass


class SingularPointError(BsPairError, ValueError):
    pass


class InvalidTestFunctionError(BsPairError, ValueError):
    pass


class ConfigError(BsPairError, ValueError):
    pass
