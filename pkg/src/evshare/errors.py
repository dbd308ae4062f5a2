"""Exception types.  ``exit_code`` is what the command line returns."""


class EvShareError(Exception):
    exit_code = 1


class ConfigError(EvShareError):
    exit_code = 2


class InvalidStationSpec(ConfigError):
    pass


class MissingTravelTime(ConfigError):
    pass


class InvalidConfig(ConfigError):
    pass


class BoundViolation(ConfigError):
    pass


class DomainError(EvShareError, ValueError):
    exit_code = 2


class OptimizationError(EvShareError):
    exit_code = 3


class InfeasibleAtCap(OptimizationError):
    def __init__(self, message, max_availability=None):
        super().__init__(message)
        self.max_availability = max_availability


class NumericalError(EvShareError):
    exit_code = 4


class ReducibleNetwork(NumericalError):
    pass


class NumericalUnderflow(NumericalError):
    pass


class NonPositiveProbability(NumericalError):
    pass


class UnstableQueue(DomainError):
    pass
