"""Forward-mode differentiation via dual numbers, plus a finite-difference oracle.

Every numeric kernel in the package is written against the generic scalar
helpers below (``sin``, ``cos``, ``sqrt``, ...) so the same code path runs on
plain floats and on :class:`Dual` values carrying derivative vectors.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .errors import AngleNearPiWarning, GimbalLockError, NonDifferentiablePoint

__all__ = [
    "Dual",
    "value",
    "values",
    "sin",
    "cos",
    "tan",
    "sqrt",
    "exp",
    "log",
    "atan2",
    "asin",
    "acos",
    "jacobian_ad",
    "jacobian_fd",
]


class Dual:
    """First-order dual number with a vector of partial derivatives."""

    __slots__ = ("val", "der")

    def __init__(self, val, der):
        self.val = float(val)
        self.der = der  # np.ndarray, shape (k,)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.der + other.der)
        if isinstance(other, np.ndarray):
            return NotImplemented  # let numpy broadcast elementwise
        return Dual(self.val + other, self.der)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val - other.val, self.der - other.der)
        if isinstance(other, np.ndarray):
            return NotImplemented
        return Dual(self.val - other, self.der)

    def __rsub__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        return Dual(other - self.val, -self.der)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val * other.val, self.val * other.der + other.val * self.der)
        if isinstance(other, np.ndarray):
            return NotImplemented
        return Dual(self.val * other, self.der * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            inv = 1.0 / other.val
            return Dual(self.val * inv, (self.der - self.val * inv * other.der) * inv)
        if isinstance(other, np.ndarray):
            return NotImplemented
        return Dual(self.val / other, self.der / other)

    def __rtruediv__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        inv = 1.0 / self.val
        return Dual(other * inv, -other * inv * inv * self.der)

    def __neg__(self):
        return Dual(-self.val, -self.der)

    def __pos__(self):
        return self

    def __pow__(self, p):
        if isinstance(p, Dual):
            raise TypeError("dual exponent not supported")
        if p == 2:
            return Dual(self.val * self.val, 2.0 * self.val * self.der)
        v = self.val ** p
        return Dual(v, p * self.val ** (p - 1) * self.der)

    def __abs__(self):
        return Dual(-self.val, -self.der) if self.val < 0.0 else self

    # -- comparisons (on the value part) ------------------------------------

    def __lt__(self, other):
        return self.val < value(other)

    def __le__(self, other):
        return self.val <= value(other)

    def __gt__(self, other):
        return self.val > value(other)

    def __ge__(self, other):
        return self.val >= value(other)

    def __float__(self):
        return self.val

    def __repr__(self):
        return f"Dual({self.val}, {self.der})"


def value(x):
    """Float value of a scalar that may be a Dual."""
    return x.val if isinstance(x, Dual) else float(x)


def values(arr):
    """Float array of values from a possibly-dual array."""
    a = np.asarray(arr)
    if a.dtype == object:
        return np.array([value(x) for x in a.ravel()]).reshape(a.shape)
    return a.astype(float)


# -- generic scalar transcendentals -----------------------------------------


def sin(x):
    if isinstance(x, Dual):
        return Dual(math.sin(x.val), math.cos(x.val) * x.der)
    return math.sin(x)


def cos(x):
    if isinstance(x, Dual):
        return Dual(math.cos(x.val), -math.sin(x.val) * x.der)
    return math.cos(x)


def tan(x):
    if isinstance(x, Dual):
        t = math.tan(x.val)
        return Dual(t, (1.0 + t * t) * x.der)
    return math.tan(x)


def sqrt(x):
    if isinstance(x, Dual):
        s = math.sqrt(x.val)
        return Dual(s, x.der / (2.0 * s))
    return math.sqrt(x)


def exp(x):
    if isinstance(x, Dual):
        e = math.exp(x.val)
        return Dual(e, e * x.der)
    return math.exp(x)


def log(x):
    if isinstance(x, Dual):
        return Dual(math.log(x.val), x.der / x.val)
    return math.log(x)


def atan2(y, x):
    if isinstance(y, Dual) or isinstance(x, Dual):
        yv, xv = value(y), value(x)
        denom = xv * xv + yv * yv
        dy = y.der if isinstance(y, Dual) else 0.0
        dx = x.der if isinstance(x, Dual) else 0.0
        return Dual(math.atan2(yv, xv), (xv * dy - yv * dx) / denom)
    return math.atan2(y, x)


def asin(x):
    if isinstance(x, Dual):
        return Dual(math.asin(x.val), x.der / math.sqrt(1.0 - x.val * x.val))
    return math.asin(x)


def acos(x):
    if isinstance(x, Dual):
        return Dual(math.acos(x.val), -x.der / math.sqrt(1.0 - x.val * x.val))
    return math.acos(x)


# -- Jacobians ---------------------------------------------------------------


def seed(x):
    """Object array of duals seeded with identity derivative directions."""
    x = np.asarray(x, dtype=float)
    n = x.size
    out = np.empty(n, dtype=object)
    eye = np.eye(n)
    for i in range(n):
        out[i] = Dual(x.flat[i], eye[i])
    return out.reshape(x.shape)


def jacobian_ad(f, x):
    """Exact forward-mode Jacobian of ``f`` at ``x``.

    Raises NonDifferentiablePoint when ``f`` hits a gimbal-lock or
    angle-near-pi branch at ``x``.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", AngleNearPiWarning)
            y = f(seed(x))
    except (GimbalLockError, AngleNearPiWarning) as e:
        raise NonDifferentiablePoint(str(e)) from e
    y = np.asarray(y, dtype=object).ravel()
    J = np.zeros((y.size, n))
    for i, yi in enumerate(y):
        if isinstance(yi, Dual):
            J[i] = yi.der
    return J


def jacobian_fd(f, x, step=1e-6):
    """Central finite-difference Jacobian (the project-wide verification oracle)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    cols = []
    for i in range(n):
        xp = x.copy()
        xm = x.copy()
        xp.flat[i] += step
        xm.flat[i] -= step
        fp = np.asarray(f(xp), dtype=float).ravel()
        fm = np.asarray(f(xm), dtype=float).ravel()
        cols.append((fp - fm) / (2.0 * step))
    return np.column_stack(cols)
