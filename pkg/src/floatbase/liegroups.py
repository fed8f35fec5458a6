"""SO(3)/SE(3) group operations, quaternion and Euler-angle kinematics.

Conventions fixed project-wide:

* tangent vectors are ordered (linear, angular): ``xi = [rho_t, w]``
* quaternions are scalar-first 4-vectors ``[s, x, y, z]``
* body twists flatten to ``[v_lin, w_ang]`` so that ``xi = twist * h``
* roll-pitch-yaw compose as ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``

All kernels accept plain float arrays or object arrays of dual numbers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import diff as dm
from .diff import value
from .errors import AngleNearPiWarning, DegenerateQuaternionError, GimbalLockError

SMALL_ANGLE = 1e-4  # switch to Taylor series below this rotation angle
NEAR_PI = 1e-4      # width of the dedicated log branch around theta = pi
EPS_GIMBAL = 1e-6   # default pitch guard for the Euler rate map
ORTHO_DRIFT = 1e-12


def _mat(rows):
    if any(isinstance(x, dm.Dual) for r in rows for x in r):
        m = np.empty((len(rows), len(rows[0])), dtype=object)
        for i, r in enumerate(rows):
            for j, x in enumerate(r):
                m[i, j] = x
        return m
    return np.array(rows, dtype=float)


def _vec(xs):
    if any(isinstance(x, dm.Dual) for x in xs):
        v = np.empty(len(xs), dtype=object)
        for i, x in enumerate(xs):
            v[i] = x
        return v
    return np.array(xs, dtype=float)


def cross3(a, b):
    return _vec([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def dot3(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def hat3(w):
    """Skew matrix such that hat3(w) @ u == cross(w, u)."""
    z = 0.0
    return _mat([[z, -w[2], w[1]], [w[2], z, -w[0]], [-w[1], w[0], z]])


def vee3(m):
    return _vec([m[2][1], m[0][2], m[1][0]])


# -- pose container ----------------------------------------------------------


@dataclass(frozen=True)
class Se3Pose:
    """Rigid-body pose: 3x3 rotation plus translation (meters)."""

    rot: np.ndarray
    trans: np.ndarray

    @staticmethod
    def identity():
        return Se3Pose(np.eye(3), np.zeros(3))

    def compose(self, other: "Se3Pose") -> "Se3Pose":
        return Se3Pose(np.dot(self.rot, other.rot),
                       np.dot(self.rot, other.trans) + self.trans)

    def inverse(self) -> "Se3Pose":
        rt = self.rot.T
        return Se3Pose(rt, -np.dot(rt, self.trans))

    def apply(self, p):
        return np.dot(self.rot, p) + self.trans

    def matrix(self):
        m = np.eye(4)
        m[:3, :3] = dm.values(self.rot)
        m[:3, 3] = dm.values(self.trans)
        return m


@dataclass(frozen=True)
class Twist6:
    """Body-frame twist: angular (rad/s) and linear (m/s) parts."""

    ang: np.ndarray
    lin: np.ndarray

    @staticmethod
    def zero():
        return Twist6(np.zeros(3), np.zeros(3))

    @staticmethod
    def from_vector(v):
        return Twist6(np.asarray(v[3:6]), np.asarray(v[0:3]))

    def as_vector(self):
        return np.concatenate([np.asarray(self.lin, dtype=float),
                               np.asarray(self.ang, dtype=float)])


def check_rotation(m, tol=1e-9):
    """Raise ValueError unless m is orthonormal with determinant +1."""
    m = dm.values(m)
    if np.max(np.abs(np.dot(m.T, m) - np.eye(3))) > tol:
        raise ValueError("matrix is not orthonormal")
    if abs(np.linalg.det(m) - 1.0) > tol:
        raise ValueError("matrix determinant is not +1")
    return m


def project_rotation(m):
    """Nearest orthonormal matrix (polar projection via SVD)."""
    u, _, vt = np.linalg.svd(m)
    r = np.dot(u, vt)
    if np.linalg.det(r) < 0:
        u[:, -1] = -u[:, -1]
        r = np.dot(u, vt)
    return r


# -- SO(3) -------------------------------------------------------------------


def _ab_coeffs(t2):
    """sin(t)/t and (1-cos(t))/t^2 with series fallback (t2 = theta^2)."""
    if value(t2) < SMALL_ANGLE ** 2:
        a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0
        b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0
    else:
        t = dm.sqrt(t2)
        a = dm.sin(t) / t
        b = (1.0 - dm.cos(t)) / t2
    return a, b


def _c_coeff(t2):
    """(t - sin t)/t^3 with series fallback."""
    if value(t2) < SMALL_ANGLE ** 2:
        return 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
    t = dm.sqrt(t2)
    return (t - dm.sin(t)) / (t2 * t)


def exp_so3(w):
    """Rotation by angle ||w|| about axis w/||w||."""
    t2 = dot3(w, w)
    a, b = _ab_coeffs(t2)
    wh = hat3(w)
    return np.eye(3) + a * wh + b * np.dot(wh, wh)


def _skew_part_vec(R):
    """vee of the antisymmetric part of R, equal to sin(theta) * axis."""
    return 0.5 * _vec([R[2][1] - R[1][2], R[0][2] - R[2][0], R[1][0] - R[0][1]])


def log_so3(R):
    """Rotation vector with angle in [0, pi]; warns on the near-pi branch."""
    tr = R[0][0] + R[1][1] + R[2][2]
    c = 0.5 * (tr - 1.0)
    cv = value(c)
    sv = _skew_part_vec(R)  # sin(theta) * axis
    if cv > 1.0 - 1e-10:
        # identity neighborhood: theta/sin(theta) ~ 1 + theta^2/6
        t2 = dot3(sv, sv)
        return (1.0 + t2 / 6.0) * sv
    if cv < -1.0 + 0.5 * NEAR_PI ** 2:
        warnings.warn("rotation angle near pi", AngleNearPiWarning, stacklevel=2)
        # axis from the largest diagonal of (R + I); deterministic sign
        S = dm.values(R) + np.eye(3)
        k = int(np.argmax(np.diag(S)))
        axis = S[:, k] / np.linalg.norm(S[:, k])
        j = int(np.argmax(np.abs(axis)))
        if axis[j] < 0:
            axis = -axis
        s = min(max(np.linalg.norm(dm.values(sv)), 0.0), 1.0)
        theta = math.pi - math.asin(s)
        return theta * axis
    if isinstance(c, dm.Dual):
        theta = dm.acos(c)
    else:
        theta = math.acos(min(max(cv, -1.0), 1.0))
    return (theta / dm.sin(theta)) * sv


def so3_left_jacobian(w):
    t2 = dot3(w, w)
    _, b = _ab_coeffs(t2)
    c = _c_coeff(t2)
    wh = hat3(w)
    return np.eye(3) + b * wh + c * np.dot(wh, wh)


def so3_left_jacobian_inv(w):
    t2 = dot3(w, w)
    if value(t2) < SMALL_ANGLE ** 2:
        d = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    else:
        t = dm.sqrt(t2)
        d = 1.0 / t2 - (1.0 + dm.cos(t)) / (2.0 * t * dm.sin(t))
    wh = hat3(w)
    return np.eye(3) - 0.5 * wh + d * np.dot(wh, wh)


# -- SE(3) -------------------------------------------------------------------


def exp_se3(xi) -> Se3Pose:
    lin, w = xi[0:3], xi[3:6]
    R = exp_so3(w)
    V = so3_left_jacobian(w)
    return Se3Pose(R, np.dot(V, lin))


def log_se3(T: Se3Pose):
    w = log_so3(T.rot)
    lin = np.dot(so3_left_jacobian_inv(w), T.trans)
    if isinstance(lin, np.ndarray) and lin.dtype == object or isinstance(w, np.ndarray) and w.dtype == object:
        return _vec(list(lin) + list(w))
    return np.concatenate([np.asarray(lin, dtype=float), np.asarray(w, dtype=float)])


def oplus(T: Se3Pose, dxi) -> Se3Pose:
    """Right retraction  T * Exp(dxi), re-orthonormalized on drift."""
    out = T.compose(exp_se3(dxi))
    rot = out.rot
    if rot.dtype != object:
        drift = np.max(np.abs(np.dot(rot.T, rot) - np.eye(3)))
        if drift > ORTHO_DRIFT:
            rot = project_rotation(rot)
            out = Se3Pose(rot, out.trans)
    return out


def ominus(T2: Se3Pose, T1: Se3Pose):
    """Tangent difference  Log(T1^-1 * T2)."""
    return log_se3(T1.inverse().compose(T2))


def _se3_q_matrix(lin, w):
    """Coupling block of the SE(3) left Jacobian."""
    t2 = dot3(w, w)
    ph = hat3(lin)
    wh = hat3(w)
    if value(t2) < SMALL_ANGLE ** 2:
        m2 = 1.0 / 6.0 - t2 / 120.0
        m3 = 1.0 / 24.0 - t2 / 720.0
        m4 = 1.0 / 120.0 - t2 / 2520.0
    else:
        t = dm.sqrt(t2)
        st, ct = dm.sin(t), dm.cos(t)
        m2 = (t - st) / (t2 * t)
        m3 = -(1.0 - t2 / 2.0 - ct) / (t2 * t2)
        m4 = 0.5 * (m3 + 3.0 * (t - st - t2 * t / 6.0) / (t2 * t2 * t))
    whph = np.dot(wh, ph)
    phwh = np.dot(ph, wh)
    whphwh = np.dot(whph, wh)
    wh2 = np.dot(wh, wh)
    q = 0.5 * ph
    q = q + m2 * (whph + phwh + whphwh)
    q = q + m3 * (np.dot(wh2, ph) + np.dot(ph, wh2) - 3.0 * whphwh)
    q = q + m4 * (np.dot(whph, wh2) + np.dot(wh2, phwh))
    return q


def jac_left_se3(xi):
    lin, w = xi[0:3], xi[3:6]
    jl = so3_left_jacobian(w)
    q = _se3_q_matrix(lin, w)
    out = np.zeros((6, 6), dtype=object) if jl.dtype == object or q.dtype == object else np.zeros((6, 6))
    out[0:3, 0:3] = jl
    out[0:3, 3:6] = q
    out[3:6, 3:6] = jl
    return out


def jac_right_se3(xi):
    return jac_left_se3(-np.asarray(xi))


def jac_left_inv_se3(xi):
    lin, w = xi[0:3], xi[3:6]
    jli = so3_left_jacobian_inv(w)
    q = _se3_q_matrix(lin, w)
    out = np.zeros((6, 6), dtype=object) if jli.dtype == object or q.dtype == object else np.zeros((6, 6))
    out[0:3, 0:3] = jli
    out[0:3, 3:6] = -np.dot(jli, np.dot(q, jli))
    out[3:6, 3:6] = jli
    return out


def jac_right_inv_se3(xi):
    return jac_left_inv_se3(-np.asarray(xi))


def adjoint_se3(T: Se3Pose):
    """6x6 adjoint for (lin, ang)-ordered tangent vectors."""
    R = T.rot
    ph = hat3(T.trans)
    out = np.zeros((6, 6), dtype=object) if (isinstance(R, np.ndarray) and R.dtype == object) else np.zeros((6, 6))
    out[0:3, 0:3] = R
    out[0:3, 3:6] = np.dot(ph, R)
    out[3:6, 3:6] = R
    return out


# -- Euler angles ------------------------------------------------------------


def rotx(a):
    c, s = dm.cos(a), dm.sin(a)
    return _mat([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def roty(a):
    c, s = dm.cos(a), dm.sin(a)
    return _mat([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotz(a):
    c, s = dm.cos(a), dm.sin(a)
    return _mat([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rpy_to_rot(rpy):
    """Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    return np.dot(rotz(rpy[2]), np.dot(roty(rpy[1]), rotx(rpy[0])))


def euler_rate_matrix(rpy, eps_gl=EPS_GIMBAL):
    """W(theta) mapping body angular velocity to roll-pitch-yaw rates."""
    phi, theta = rpy[0], rpy[1]
    ct = dm.cos(theta)
    if abs(value(ct)) <= eps_gl:
        raise GimbalLockError(f"pitch {value(theta):.6f} rad is within the gimbal guard")
    sp, cp = dm.sin(phi), dm.cos(phi)
    tt = dm.sin(theta) / ct
    return _mat([
        [1.0, sp * tt, cp * tt],
        [0.0, cp, -sp],
        [0.0, sp / ct, cp / ct],
    ])


# -- quaternions (scalar-first) ---------------------------------------------


def quat_identity():
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_mul(a, b):
    s1, v1 = a[0], a[1:4]
    s2, v2 = b[0], b[1:4]
    s = s1 * s2 - dot3(v1, v2)
    v = s1 * np.asarray(v2) + s2 * np.asarray(v1) + cross3(v1, v2)
    return _vec([s, v[0], v[1], v[2]])


def quat_rate(rho, w_b):
    """Quaternion time derivative  0.5 * L(rho) * H * w_b."""
    s, nu = rho[0], rho[1:4]
    top = -0.5 * dot3(nu, w_b)
    vec = 0.5 * (s * np.asarray(w_b) + cross3(nu, w_b))
    return _vec([top, vec[0], vec[1], vec[2]])


def quat_norm(rho):
    return dm.sqrt(rho[0] ** 2 + rho[1] ** 2 + rho[2] ** 2 + rho[3] ** 2)


def quat_normalize(rho):
    n = quat_norm(rho)
    if value(n) <= 1e-12:
        raise DegenerateQuaternionError("quaternion norm below 1e-12")
    return np.asarray(rho) / n


def quat_normalize_jacobian(rho):
    """4x4 Jacobian of quat_normalize:  (I - q q^T / n^2) / n."""
    rho = np.asarray(rho, dtype=float)
    n = np.linalg.norm(rho)
    if n <= 1e-12:
        raise DegenerateQuaternionError("quaternion norm below 1e-12")
    return (np.eye(4) - np.outer(rho, rho) / n ** 2) / n


def quat_canonicalize(rho):
    """Pick the double-cover representative with non-negative scalar part."""
    return -np.asarray(rho) if value(rho[0]) < 0.0 else np.asarray(rho)


def quat_to_rot(rho):
    s, x, y, z = rho[0], rho[1], rho[2], rho[3]
    return _mat([
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - s * z), 2.0 * (x * z + s * y)],
        [2.0 * (x * y + s * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - s * x)],
        [2.0 * (x * z - s * y), 2.0 * (y * z + s * x), 1.0 - 2.0 * (x * x + y * y)],
    ])


def rot_to_quat(R):
    """Canonical (s >= 0) unit quaternion from a rotation matrix.

    Shepperd-style branch on the largest of trace/diagonal candidates keeps
    every branch numerically well conditioned.
    """
    tr = value(R[0][0]) + value(R[1][1]) + value(R[2][2])
    cands = [tr, value(R[0][0]), value(R[1][1]), value(R[2][2])]
    k = int(np.argmax(cands))
    if k == 0:
        t = 1.0 + R[0][0] + R[1][1] + R[2][2]
        r = dm.sqrt(t)
        s = 0.5 * r
        inv = 0.5 / r
        q = [s, (R[2][1] - R[1][2]) * inv, (R[0][2] - R[2][0]) * inv, (R[1][0] - R[0][1]) * inv]
    elif k == 1:
        t = 1.0 + R[0][0] - R[1][1] - R[2][2]
        r = dm.sqrt(t)
        inv = 0.5 / r
        q = [(R[2][1] - R[1][2]) * inv, 0.5 * r, (R[0][1] + R[1][0]) * inv, (R[0][2] + R[2][0]) * inv]
    elif k == 2:
        t = 1.0 - R[0][0] + R[1][1] - R[2][2]
        r = dm.sqrt(t)
        inv = 0.5 / r
        q = [(R[0][2] - R[2][0]) * inv, (R[0][1] + R[1][0]) * inv, 0.5 * r, (R[1][2] + R[2][1]) * inv]
    else:
        t = 1.0 - R[0][0] - R[1][1] + R[2][2]
        r = dm.sqrt(t)
        inv = 0.5 / r
        q = [(R[1][0] - R[0][1]) * inv, (R[0][2] + R[2][0]) * inv, (R[1][2] + R[2][1]) * inv, 0.5 * r]
    q = _vec(q)
    return quat_canonicalize(q)


def rpy_to_quat(rpy):
    hr, hp, hy = rpy[0] * 0.5, rpy[1] * 0.5, rpy[2] * 0.5
    qx = _vec([dm.cos(hr), dm.sin(hr), 0.0, 0.0])
    qy = _vec([dm.cos(hp), 0.0, dm.sin(hp), 0.0])
    qz = _vec([dm.cos(hy), 0.0, 0.0, dm.sin(hy)])
    return quat_canonicalize(quat_mul(qz, quat_mul(qy, qx)))


def rot_to_rpy(R, eps_gl=EPS_GIMBAL):
    st = -R[2][0]
    ct = dm.sqrt(R[0][0] ** 2 + R[1][0] ** 2)
    if value(ct) <= eps_gl:
        raise GimbalLockError("pitch at +-90 deg: roll-pitch-yaw extraction is singular")
    pitch = dm.atan2(st, ct)
    roll = dm.atan2(R[2][1], R[2][2])
    yaw = dm.atan2(R[1][0], R[0][0])
    return _vec([roll, pitch, yaw])


def quat_to_rpy(rho, eps_gl=EPS_GIMBAL):
    return rot_to_rpy(quat_to_rot(rho), eps_gl)


def pose_from_parts(p, rho) -> Se3Pose:
    """Exp_q: translation vector plus unit quaternion -> pose."""
    return Se3Pose(quat_to_rot(quat_normalize(rho)), np.asarray(p))


def parts_from_pose(T: Se3Pose):
    """Log_q: pose -> (translation, canonical unit quaternion)."""
    return T.trans, rot_to_quat(T.rot)
