"""Exception hierarchy.

Every error carries an ``exit_code`` used by the CLI: 2 for invalid input,
3 for numerical failures.
"""


class SuperintError(Exception):
    exit_code = 3

    def to_dict(self):
        return {"error": type(self).__name__, "message": str(self)}


class ValidationError(SuperintError):
    exit_code = 2


# potentials / special functions
class PoleProximity(SuperintError):
    pass


class DomainViolation(SuperintError):
    pass


class NoRealRoot(SuperintError):
    pass


class BranchJump(SuperintError):
    pass


class FitDegenerate(SuperintError):
    pass


class PoleCrossed(SuperintError):
    pass


class NotCached(SuperintError):
    pass


# integrals
class UndefinedG(SuperintError):
    pass


class DerivativeUnavailable(SuperintError):
    pass


class QuadratureFailure(SuperintError):
    pass


class IncompatibleAnsatz(SuperintError):
    pass


# dynamics
class PoleEncounter(SuperintError):
    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class Overflow(SuperintError):
    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class NotBounded(SuperintError):
    pass


class NotSeparable(SuperintError):
    pass


# algebraic trajectories
class ClassicallyForbidden(SuperintError):
    pass


class SeedNotOnOrbit(SuperintError):
    pass


class BranchDeadEnd(SuperintError):
    def __init__(self, message, orbit=None):
        super().__init__(message)
        self.orbit = orbit


# cubic algebra
class NoSolution(SuperintError):
    pass


class NewtonDivergence(SuperintError):
    pass


class RepresentationInconsistent(SuperintError):
    pass


# schrodinger
class NotConverged(SuperintError):
    pass


class StencilBoundary(SuperintError):
    pass
