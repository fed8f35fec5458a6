"""Exception and warning types shared across the package."""


class FloatbaseError(Exception):
    """Base class for all package-specific errors."""


class GimbalLockError(FloatbaseError):
    """Euler-angle rate map evaluated too close to pitch = +-90 deg."""


class DegenerateQuaternionError(FloatbaseError):
    """Quaternion norm too small to normalize."""


class ChartMismatchError(FloatbaseError):
    """Two base-coordinate values on different charts were combined."""


class UnknownFrameError(FloatbaseError):
    """A named frame or link does not exist in the robot model."""


class ParseError(FloatbaseError):
    """A model/task/suite document is malformed."""


class ValidationError(FloatbaseError):
    """A parsed document violates a structural invariant."""


class ScheduleError(FloatbaseError):
    """The contact schedule references a frame the model does not have."""


class DimensionError(FloatbaseError):
    """Vector or matrix dimensions inconsistent with the problem layout."""


class NonDifferentiablePoint(FloatbaseError):
    """Automatic differentiation requested at a point where the function
    is not differentiable (gimbal lock, rotation-angle-near-pi branch)."""


class UnregisteredPrimitive(FloatbaseError):
    """An expression node without a registered analytic Jacobian rule."""


class EvaluationError(FloatbaseError):
    """A solver iterate could not be evaluated."""


class AngleNearPiWarning(UserWarning):
    """Diagnostic: the rotation-log near-pi branch was taken.

    Not a failure for plain evaluation; forward-mode differentiation
    treats it as a non-differentiable point.
    """


class IoError(FloatbaseError):
    """File could not be read or written."""
