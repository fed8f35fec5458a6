"""The five floating-base parameterizations behind one interface.

Each chart defines its decision-variable layout, a difference operation and
an elementary integration rule.  Whole-configuration stepping is semi-implicit:
velocities are updated first, configurations integrate with the new velocity.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import diff as dm
from . import liegroups as lg
from .errors import ChartMismatchError, DimensionError


class ChartKind(enum.Enum):
    Se3Tangent = "se3_tangent"
    Quat1 = "quat1"
    Quat2 = "quat2"
    Quat3 = "quat3"
    Rpy = "rpy"

    @staticmethod
    def from_name(name: str) -> "ChartKind":
        for c in ChartKind:
            if c.value == name:
                return c
        raise ValueError(f"unknown chart {name!r}; expected one of "
                         f"{[c.value for c in ChartKind]}")


ALL_CHARTS = tuple(ChartKind)


@dataclass(frozen=True)
class BaseCoords:
    chart: ChartKind
    data: np.ndarray

    def __post_init__(self):
        if len(self.data) != chart_dim(self.chart):
            raise DimensionError(
                f"{self.chart.value} expects {chart_dim(self.chart)} coords, "
                f"got {len(self.data)}")


@dataclass(frozen=True)
class GeneralizedConfig:
    base: BaseCoords
    joints: np.ndarray


@dataclass(frozen=True)
class GeneralizedVel:
    base: lg.Twist6
    joints: np.ndarray

    def as_vector(self):
        return np.concatenate([self.base.as_vector(), np.asarray(self.joints, dtype=float)])


def chart_dim(c: ChartKind) -> int:
    """Decision-variable count of the floating-base block."""
    return {ChartKind.Se3Tangent: 6, ChartKind.Quat1: 7, ChartKind.Quat2: 7,
            ChartKind.Quat3: 7, ChartKind.Rpy: 6}[c]


def diff_dim(c: ChartKind) -> int:
    """Row count of the chart's difference vector."""
    return {ChartKind.Se3Tangent: 6, ChartKind.Quat1: 7, ChartKind.Quat2: 7,
            ChartKind.Quat3: 6, ChartKind.Rpy: 6}[c]


def base_to_pose(x: BaseCoords) -> lg.Se3Pose:
    return coords_to_pose(x.chart, x.data)


def coords_to_pose(c: ChartKind, data) -> lg.Se3Pose:
    if c is ChartKind.Se3Tangent:
        return lg.exp_se3(data)
    if c is ChartKind.Rpy:
        return lg.Se3Pose(lg.rpy_to_rot(data[3:6]), np.asarray(data[0:3]))
    return lg.pose_from_parts(data[0:3], data[3:7])


def pose_to_coords(c: ChartKind, T: lg.Se3Pose) -> np.ndarray:
    if c is ChartKind.Se3Tangent:
        return np.asarray(lg.log_se3(T))
    if c is ChartKind.Rpy:
        return np.concatenate([dm.values(T.trans), dm.values(lg.rot_to_rpy(T.rot))])
    p, q = lg.parts_from_pose(T)
    return np.concatenate([dm.values(p), dm.values(q)])


def _cat(*parts):
    xs = [x for p in parts for x in p]
    return lg._vec(xs)


def base_difference(c: ChartKind, x1, x2):
    """Chart-specific difference between two coordinate vectors (x2 - x1)."""
    if isinstance(x1, BaseCoords):
        if x1.chart is not x2.chart:
            raise ChartMismatchError(f"{x1.chart} vs {x2.chart}")
        if x1.chart is not c:
            raise ChartMismatchError(f"coords on {x1.chart}, requested {c}")
        x1, x2 = x1.data, x2.data
    if c is ChartKind.Se3Tangent:
        return lg.ominus(lg.exp_se3(x2), lg.exp_se3(x1))
    if c is ChartKind.Quat3:
        return lg.ominus(coords_to_pose(c, x2), coords_to_pose(c, x1))
    # Quat1/Quat2/Rpy: plain componentwise subtraction
    return np.asarray(x2) - np.asarray(x1)


def base_integrate(c: ChartKind, x, twist: lg.Twist6, h: float):
    """One elementary integration step of the base coordinates."""
    if isinstance(x, BaseCoords):
        return BaseCoords(c, base_integrate(c, x.data, twist, h))
    w, v = twist.ang, twist.lin
    if c is ChartKind.Se3Tangent:
        dxi = _cat(np.asarray(v) * h, np.asarray(w) * h)
        return lg.log_se3(lg.oplus(lg.exp_se3(x), dxi))
    if c is ChartKind.Quat1:
        p, rho = x[0:3], x[3:7]
        pdot = np.dot(lg.quat_to_rot(rho), v)  # world-frame translation rate
        rho_new = lg.quat_normalize(np.asarray(rho) + lg.quat_rate(rho, w) * h)
        return _cat(np.asarray(p) + pdot * h, rho_new)
    if c in (ChartKind.Quat2, ChartKind.Quat3):
        T = lg.pose_from_parts(x[0:3], x[3:7])
        dxi = _cat(np.asarray(v) * h, np.asarray(w) * h)
        T2 = lg.oplus(T, dxi)
        return _cat(T2.trans, lg.rot_to_quat(T2.rot))
    if c is ChartKind.Rpy:
        p, th = x[0:3], x[3:6]
        pdot = np.dot(lg.rpy_to_rot(th), v)
        thdot = np.dot(lg.euler_rate_matrix(th), w)
        return _cat(np.asarray(p) + pdot * h, np.asarray(th) + thdot * h)
    raise ValueError(c)


def residual_integration(c: ChartKind, x_k, x_next, twist: lg.Twist6, h: float):
    """Zero iff x_next is the integrated successor of x_k under the twist.

    For the SE(3) tangent chart the intermediate Log of base_integrate is
    algebraically removable (Exp after Log cancels); composing poses directly
    keeps the residual smooth even when the pose itself is near angle pi.
    """
    if c is ChartKind.Se3Tangent:
        dxi = _cat(np.asarray(twist.lin) * h, np.asarray(twist.ang) * h)
        T_pred = lg.exp_se3(x_k).compose(lg.exp_se3(dxi))
        return lg.ominus(lg.exp_se3(x_next), T_pred)
    x_pred = base_integrate(c, x_k, twist, h)
    return base_difference(c, x_pred, x_next)


def integrate_step(model, q: GeneralizedConfig, v: GeneralizedVel, a, h: float):
    """Semi-implicit Euler step of the whole configuration.

    ``a`` is the 6+n generalized acceleration; the velocity update happens
    first and the configuration integrates with the updated velocity.
    """
    a = np.asarray(a, dtype=float)
    n = len(v.joints)
    if a.size != 6 + n:
        raise DimensionError(f"acceleration must have {6 + n} entries")
    vvec = v.as_vector() + a * h
    v_new = GeneralizedVel(lg.Twist6.from_vector(vvec[:6]), vvec[6:])
    base_new = base_integrate(q.base.chart, q.base, v_new.base, h)
    joints_new = np.asarray(q.joints, dtype=float) + vvec[6:] * h
    return GeneralizedConfig(base_new, joints_new), v_new
