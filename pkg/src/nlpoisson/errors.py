"""Exception and warning types raised across the package."""


class NlPoissonError(Exception):
    """Base class for all package errors."""


class ValidationError(NlPoissonError, ValueError):
    """Invalid user input (parameters, files, fixture ids)."""


class NumericalError(NlPoissonError, ArithmeticError):
    """A numerical procedure failed to meet its contract."""


class OrderExceeded(ValidationError):
    pass


class SingularPoint(NumericalError):
    pass


class UnboundedLimit(NumericalError):
    pass


class UnsupportedOrder(ValidationError):
    pass


class QuadratureNonConvergence(NumericalError):
    pass


class KrylovStall(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


class NearZeroMultiplier(NumericalError):
    pass


class LevelExceedsKernelSmoothness(ValidationError):
    pass


class SingularJump(NumericalError):
    pass


class InsufficientStencil(ValidationError):
    pass


class UnknownFixture(ValidationError, KeyError):
    def __str__(self):
        # KeyError would quote the message
        return str(self.args[0]) if self.args else ""


class MisalignedHorizon(UserWarning):
    """Horizon is not an integer multiple of the grid spacing."""
