"""Exception hierarchy shared across the package."""


class CoalChainError(Exception):
    """Base class for all package errors."""


class InputError(CoalChainError):
    """Malformed or out-of-range input data (instance, config, arguments)."""


class HorizonError(CoalChainError):
    """A search ran past the available data horizon (e.g. tide table exhausted)."""


class IncompleteSolutionError(CoalChainError):
    """A solution is missing schedules required by the requested computation."""


class SchedulingError(CoalChainError):
    """The constructive scheduler could not complete a feasible schedule.

    Carries the partial solution built so far in ``partial``.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
