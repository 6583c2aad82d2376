"""Exception types shared by all modules."""


class ImftError(Exception):
    """Base class for library errors."""


class Singular(ImftError):
    pass


class SingularJacobian(Singular):
    pass


class SingularJacobianY(Singular):
    pass


class NotHurwitz(ImftError):
    pass


class NoStabilizingSolution(ImftError):
    pass


class NonFinite(ImftError):
    pass


class NonPositiveM(ImftError):
    pass


class NoFeasibleRegion(ImftError):
    """The constants admit no positive radius pair."""


class NoConvergence(ImftError):
    pass


class OutsidePolyhedron(ImftError):
    pass


class BallNotInPolyhedron(ImftError):
    pass


class EpsTooLarge(ImftError):
    pass


class ValidationError(ImftError):
    pass


class ParseError(ImftError):
    def __init__(self, line, reason):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class ZeroImpedanceBranch(ValidationError):
    pass


class DivisionByZeroB(ImftError):
    pass


class VanishesOnBoundary(ImftError):
    pass


class UnsupportedDimension(ImftError):
    pass


class Inconclusive(ImftError):
    """Winding computation hit its sample cap without resolving."""
