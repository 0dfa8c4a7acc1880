"""Exception hierarchy shared across the package."""


class CbfGuardError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(CbfGuardError):
    pass


class Unsupported(CbfGuardError):
    pass


class EmptyPolytope(CbfGuardError):
    pass


class UnboundedPolytope(CbfGuardError):
    pass


class LpInfeasible(CbfGuardError):
    pass


class LpUnbounded(CbfGuardError):
    pass


class DegenerateInfeasible(CbfGuardError):
    """No input can satisfy the CBF condition at a state where L_g h = 0."""


class NonpositiveSupport(CbfGuardError):
    pass


class InfeasibleQP(CbfGuardError):
    """The intersection of input constraints is empty at the queried state."""

    def __init__(self, msg, state=None, time=None, partial_trajectory=None):
        super().__init__(msg)
        self.state = state
        self.time = time
        self.partial_trajectory = partial_trajectory


class NonpositiveMargin(CbfGuardError):
    """Chebyshev radius does not exceed the norm of the Chebyshev center."""


class NotFound(CbfGuardError):
    pass


class InvalidTightening(CbfGuardError):
    pass


class EmptyTightenedSet(CbfGuardError):
    pass


class NoFeasibleTightening(CbfGuardError):
    pass


class EmptyIntersection(CbfGuardError):
    pass


class NoFeasibleCandidate(CbfGuardError):
    def __init__(self, msg, rejection_counts=None):
        super().__init__(msg)
        self.rejection_counts = dict(rejection_counts or {})


class NumericalBlowup(CbfGuardError):
    def __init__(self, msg, state=None, time=None, partial_trajectory=None):
        super().__init__(msg)
        self.state = state
        self.time = time
        self.partial_trajectory = partial_trajectory


class ConfigError(CbfGuardError):
    """Configuration file rejected; ``path`` is the JSON path of the bad field."""

    def __init__(self, path, msg):
        super().__init__(f"{path}: {msg}")
        self.path = path
