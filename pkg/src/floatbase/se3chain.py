"""Analytic Jacobians for composites of SE(3) primitives.

A tiny expression tree over {variable, Exp, Log, compose, inverse, oplus,
ominus} whose Jacobian is assembled by chaining left/right Lie Jacobians.
Pose-valued nodes carry the Jacobian of their right-tangent perturbation:
``d = Log(T0^-1 T(x + dx)) ~ J dx``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import liegroups as lg
from .errors import UnregisteredPrimitive


class Expr:
    """Base class for chain-rule expression nodes."""

    def __add__(self, other):  # no implicit arithmetic on manifold values
        raise UnregisteredPrimitive("poses do not support '+'; use oplus")


@dataclass(frozen=True)
class Var(Expr):
    """A 6-vector slice of the input, starting at ``offset``."""
    offset: int


@dataclass(frozen=True)
class Exp(Expr):
    arg: Expr


@dataclass(frozen=True)
class Log(Expr):
    arg: Expr


@dataclass(frozen=True)
class Compose(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Inv(Expr):
    arg: Expr


@dataclass(frozen=True)
class Const(Expr):
    pose: lg.Se3Pose


def Oplus(a: Expr, d: Expr) -> Expr:
    return Compose(a, Exp(d))


def Ominus(b: Expr, a: Expr) -> Expr:
    return Log(Compose(Inv(a), b))


@dataclass(frozen=True)
class Scale(Expr):
    arg: Expr
    factor: float


def _eval(expr, x, n):
    """Returns ("vec", value, J) or ("pose", pose, J_right_tangent)."""
    if isinstance(expr, Var):
        J = np.zeros((6, n))
        J[:, expr.offset:expr.offset + 6] = np.eye(6)
        return "vec", np.asarray(x[expr.offset:expr.offset + 6], dtype=float), J
    if isinstance(expr, Scale):
        kind, v, J = _eval(expr.arg, x, n)
        if kind != "vec":
            raise UnregisteredPrimitive("Scale applies to vectors only")
        return "vec", expr.factor * v, expr.factor * J
    if isinstance(expr, Const):
        return "pose", expr.pose, np.zeros((6, n))
    if isinstance(expr, Exp):
        kind, v, J = _eval(expr.arg, x, n)
        if kind != "vec":
            raise UnregisteredPrimitive("Exp applies to vectors")
        T = lg.exp_se3(v)
        return "pose", T, np.dot(lg.jac_right_se3(v), J)
    if isinstance(expr, Log):
        kind, T, J = _eval(expr.arg, x, n)
        if kind != "pose":
            raise UnregisteredPrimitive("Log applies to poses")
        v = lg.log_se3(T)
        return "vec", v, np.dot(lg.jac_right_inv_se3(v), J)
    if isinstance(expr, Inv):
        kind, T, J = _eval(expr.arg, x, n)
        if kind != "pose":
            raise UnregisteredPrimitive("Inv applies to poses")
        return "pose", T.inverse(), -np.dot(lg.adjoint_se3(T), J)
    if isinstance(expr, Compose):
        ka, Ta, Ja = _eval(expr.left, x, n)
        kb, Tb, Jb = _eval(expr.right, x, n)
        if ka != "pose" or kb != "pose":
            raise UnregisteredPrimitive("Compose applies to poses")
        return "pose", Ta.compose(Tb), np.dot(lg.adjoint_se3(Tb.inverse()), Ja) + Jb
    raise UnregisteredPrimitive(f"no analytic Jacobian rule for {type(expr).__name__}")


def evaluate(expr: Expr, x):
    kind, v, _ = _eval(expr, np.asarray(x, dtype=float), len(x))
    return v


def jacobian_se3_chain(expr: Expr, x):
    """Analytic Jacobian of a vector-valued SE(3) composite expression."""
    x = np.asarray(x, dtype=float)
    kind, v, J = _eval(expr, x, x.size)
    if kind != "vec":
        raise UnregisteredPrimitive("top-level expression must be vector-valued (wrap in Log/Ominus)")
    return J


def integration_residual_expr(h: float):
    """Residual of the SE(3)-tangent integration constraint as an expression.

    Input layout: [xi_k (6), xi_next (6), twist (6)].
    residual = (Exp(xi_k) oplus twist*h) ominus Exp(xi_next) ... sign matches
    charts.residual_integration (difference from predicted to actual).
    """
    xi_k, xi_next, twist = Var(0), Var(6), Var(12)
    pred = Oplus(Exp(xi_k), Scale(twist, h))
    return Ominus(Exp(xi_next), pred)
