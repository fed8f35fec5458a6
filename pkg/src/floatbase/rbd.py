"""Minimal spatial-algebra rigid-body dynamics for floating-base trees.

Generalized coordinates: floating-base pose (via a chart) plus n joint
values.  Generalized velocity/acceleration vectors are ordered
``[base_linear, base_angular, joints]`` with the base block a body twist.
Inverse dynamics is a recursive Newton-Euler sweep over the tree; gravity is
folded into the bias term via a fictitious base acceleration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from . import charts as ch
from . import diff as dm
from . import liegroups as lg
from .errors import DimensionError, ParseError, UnknownFrameError, ValidationError
from .liegroups import Se3Pose, cross3, hat3


@dataclass(frozen=True)
class Link:
    name: str
    mass: float
    com: np.ndarray          # meters, in link frame
    inertia: np.ndarray      # 3x3 about the COM, link frame


@dataclass(frozen=True)
class Joint:
    name: str
    kind: str                # "revolute" | "prismatic"
    axis: np.ndarray
    parent: int              # link index
    child: int               # link index
    placement: Se3Pose       # child joint frame in parent link frame


@dataclass(frozen=True)
class ContactFrame:
    name: str
    link: int
    offset: Se3Pose
    points: np.ndarray       # (m, 3) material points in the frame


@dataclass(frozen=True)
class Limits:
    tau_min: np.ndarray
    tau_max: np.ndarray
    q_min: np.ndarray
    q_max: np.ndarray
    qd_min: np.ndarray
    qd_max: np.ndarray


@dataclass(frozen=True)
class RobotModel:
    name: str
    floating: bool
    gravity: np.ndarray
    links: tuple
    joints: tuple            # topological order; joint i drives coordinate 6+i
    contact_frames: dict     # name -> ContactFrame
    limits: Limits

    @property
    def n_joints(self):
        return len(self.joints)

    @property
    def nv(self):
        return (6 if self.floating else 0) + self.n_joints

    @property
    def total_mass(self):
        return sum(l.mass for l in self.links)

    def link_index(self, name):
        for i, l in enumerate(self.links):
            if l.name == name:
                return i
        raise UnknownFrameError(f"no link named {name!r}")

    def contact_frame(self, name) -> ContactFrame:
        try:
            return self.contact_frames[name]
        except KeyError:
            raise UnknownFrameError(f"no contact frame named {name!r}") from None


def spatial_inertia(mass, com, inertia):
    """6x6 spatial inertia in (linear, angular) ordering at the link origin."""
    c = np.asarray(com, dtype=float)
    ch_ = dm.values(hat3(c))
    M = np.zeros((6, 6))
    M[0:3, 0:3] = mass * np.eye(3)
    M[0:3, 3:6] = -mass * ch_
    M[3:6, 0:3] = mass * ch_
    M[3:6, 3:6] = np.asarray(inertia, dtype=float) - mass * ch_ @ ch_
    return M


# -- model loading -----------------------------------------------------------


def _pose_from_doc(doc) -> Se3Pose:
    xyz = np.asarray(doc.get("xyz", [0.0, 0.0, 0.0]), dtype=float)
    rpy = np.asarray(doc.get("rpy", [0.0, 0.0, 0.0]), dtype=float)
    return Se3Pose(dm.values(lg.rpy_to_rot(rpy)), xyz)


def _inertia_from_doc(doc):
    arr = np.asarray(doc, dtype=float)
    if arr.shape == (3,):
        return np.diag(arr)
    if arr.shape == (3, 3):
        return arr
    raise ParseError(f"inertia must be a diagonal triple or a 3x3 matrix, got shape {arr.shape}")


def load_model(text: str) -> RobotModel:
    """Parse and validate a robot model document (YAML)."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ParseError(f"invalid model document: {e}") from e
    if not isinstance(doc, dict):
        raise ParseError("model document must be a mapping")
    try:
        name = doc.get("name", "unnamed")
        floating = bool(doc.get("floating", True))
        gravity = np.asarray(doc.get("gravity", [0.0, 0.0, -9.81]), dtype=float)
        links = []
        index = {}
        for ld in doc["links"]:
            if ld["name"] in index:
                raise ValidationError(f"duplicate link {ld['name']!r}")
            index[ld["name"]] = len(links)
            links.append(Link(ld["name"], float(ld["mass"]),
                              np.asarray(ld.get("com", [0, 0, 0]), dtype=float),
                              _inertia_from_doc(ld["inertia"])))
        joints = []
        for jd in doc.get("joints", []):
            kind = jd["type"]
            if kind not in ("revolute", "prismatic"):
                raise ValidationError(f"unsupported joint type {kind!r}")
            if jd["parent"] not in index:
                raise ValidationError(f"joint {jd['name']!r}: unknown parent {jd['parent']!r}")
            if jd["child"] not in index:
                raise ValidationError(f"joint {jd['name']!r}: unknown child {jd['child']!r}")
            axis = np.asarray(jd["axis"], dtype=float)
            nrm = np.linalg.norm(axis)
            if nrm < 1e-12:
                raise ValidationError(f"joint {jd['name']!r}: zero axis")
            joints.append(Joint(jd["name"], kind, axis / nrm, index[jd["parent"]],
                                index[jd["child"]], _pose_from_doc(jd.get("placement", {}))))
        frames = {}
        for fd in doc.get("contact_frames", []):
            pts = np.asarray(fd.get("points", [[0.0, 0.0, 0.0]]), dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 1:
                raise ValidationError(f"contact frame {fd['name']!r}: bad point set")
            frames[fd["name"]] = ContactFrame(fd["name"], index[fd["link"]],
                                              _pose_from_doc(fd.get("offset", {})), pts)
        n = len(joints)
        lim = doc.get("limits", {})

        def _pair(key, default):
            entry = lim.get(key, {})
            lo = np.asarray(entry.get("lower", [-default] * n), dtype=float)
            hi = np.asarray(entry.get("upper", [default] * n), dtype=float)
            if lo.size != n or hi.size != n:
                raise ValidationError(f"limits.{key} must have {n} entries")
            return lo, hi

        tau_lo, tau_hi = _pair("tau", np.inf)
        q_lo, q_hi = _pair("q", np.inf)
        qd_lo, qd_hi = _pair("qd", np.inf)
        limits = Limits(tau_lo, tau_hi, q_lo, q_hi, qd_lo, qd_hi)
    except KeyError as e:
        raise ParseError(f"missing required field {e}") from e

    model = RobotModel(name, floating, gravity, tuple(links), tuple(joints),
                       frames, limits)
    _validate(model)
    return model


def load_model_file(path) -> RobotModel:
    with open(path, "r", encoding="utf-8") as fh:
        return load_model(fh.read())


def _validate(model: RobotModel):
    # tree structure: every non-root link is the child of exactly one joint,
    # and each joint's child must come strictly after its parent
    child_of = {}
    for j in model.joints:
        if j.child == 0:
            raise ValidationError(f"joint {j.name!r} targets the base link")
        if j.child in child_of:
            raise ValidationError(f"link {model.links[j.child].name!r} has two parent joints")
        if j.child == j.parent:
            raise ValidationError(f"joint {j.name!r} forms a self-loop")
        child_of[j.child] = j
    for i in range(1, len(model.links)):
        if i not in child_of:
            raise ValidationError(f"link {model.links[i].name!r} is disconnected")
        # walk to the root; a cycle would revisit a link
        seen, k = set(), i
        while k != 0:
            if k in seen:
                raise ValidationError("kinematic loop detected")
            seen.add(k)
            k = child_of[k].parent
    for j in model.joints:
        if j.parent != 0 and child_of[j.parent].child >= j.child:
            pass  # order established by the walk above
    for l in model.links:
        if l.mass <= 0:
            raise ValidationError(f"link {l.name!r}: mass must be positive")
        I = l.inertia
        if np.max(np.abs(I - I.T)) > 1e-12:
            raise ValidationError(f"link {l.name!r}: inertia not symmetric")
        if np.min(np.linalg.eigvalsh(I)) <= 0:
            raise ValidationError(f"link {l.name!r}: inertia not positive-definite")
    if np.any(model.limits.tau_min > model.limits.tau_max):
        raise ValidationError("tau_min exceeds tau_max")
    if np.any(model.limits.q_min > model.limits.q_max):
        raise ValidationError("q_min exceeds q_max")
    if np.any(model.limits.qd_min > model.limits.qd_max):
        raise ValidationError("qd_min exceeds qd_max")


# -- kinematics --------------------------------------------------------------


def _joint_motion(j: Joint, qv) -> Se3Pose:
    if j.kind == "revolute":
        return Se3Pose(lg.exp_so3(np.asarray(j.axis) * qv), np.zeros(3))
    return Se3Pose(np.eye(3), np.asarray(j.axis) * qv)


def link_poses(model: RobotModel, base_pose: Se3Pose, qj):
    """World pose of every link."""
    poses = [base_pose] + [None] * (len(model.links) - 1)
    for i, j in enumerate(model.joints):
        local = j.placement.compose(_joint_motion(j, qj[i]))
        poses[j.child] = poses[j.parent].compose(local)
    return poses


def frame_pose(model: RobotModel, base_pose: Se3Pose, qj, frame: str) -> Se3Pose:
    """World pose of a contact frame (or a link, by link name)."""
    poses = link_poses(model, base_pose, qj)
    if frame in model.contact_frames:
        f = model.contact_frames[frame]
        return poses[f.link].compose(f.offset)
    return poses[model.link_index(frame)]


def forward_kinematics(model: RobotModel, q: ch.GeneralizedConfig, frame: str) -> Se3Pose:
    return frame_pose(model, ch.base_to_pose(q.base), q.joints, frame)


def link_twists(model: RobotModel, qj, base_w, base_v, qdot):
    """Body-frame (angular, linear) twist of every link."""
    nl = len(model.links)
    w = [None] * nl
    v = [None] * nl
    w[0], v[0] = np.asarray(base_w), np.asarray(base_v)
    for i, j in enumerate(model.joints):
        local = j.placement.compose(_joint_motion(j, qj[i]))
        R, t = local.rot, local.trans
        wc = np.dot(R.T, w[j.parent])
        vc = np.dot(R.T, v[j.parent] + cross3(w[j.parent], t))
        if j.kind == "revolute":
            wc = wc + np.asarray(j.axis) * qdot[i]
        else:
            vc = vc + np.asarray(j.axis) * qdot[i]
        w[j.child], v[j.child] = wc, vc
    return w, v


def point_world(model, base_pose, qj, frame: str, point_index: int):
    f = model.contact_frame(frame)
    poses = link_poses(model, base_pose, qj)
    fp = poses[f.link].compose(f.offset)
    return fp.apply(f.points[point_index])


def point_velocity_raw(model, base_pose, qj, frame, point_index, vvec):
    """World-frame linear velocity of a contact-frame material point."""
    f = model.contact_frame(frame)
    if model.floating:
        base_v, base_w, qdot = vvec[0:3], vvec[3:6], vvec[6:]
    else:
        base_v = base_w = np.zeros(3)
        qdot = vvec
    w, v = link_twists(model, qj, base_w, base_v, qdot)
    poses = link_poses(model, base_pose, qj)
    p_local = f.offset.apply(f.points[point_index])  # point in link frame
    vel_local = v[f.link] + cross3(w[f.link], p_local)
    return np.dot(poses[f.link].rot, vel_local)


def point_velocity(model, q: ch.GeneralizedConfig, v: ch.GeneralizedVel, frame, point_index=0):
    return point_velocity_raw(model, ch.base_to_pose(q.base), q.joints, frame,
                              point_index, v.as_vector())


def _ancestor_joints(model, link):
    """Joint indices on the path from the base to the link (root first)."""
    child_of = {j.child: i for i, j in enumerate(model.joints)}
    path = []
    k = link
    while k != 0:
        ji = child_of[k]
        path.append(ji)
        k = model.joints[ji].parent
    return list(reversed(path))


def contact_jacobian_raw(model, base_pose, qj, frame, point_index):
    """3 x nv matrix J with point_velocity = J @ generalized velocity."""
    f = model.contact_frame(frame)
    poses = link_poses(model, base_pose, qj)
    p_w = poses[f.link].compose(f.offset).apply(f.points[point_index])
    dual = any(isinstance(x, dm.Dual) for x in np.atleast_1d(np.asarray(p_w, dtype=object)).ravel())
    J = np.zeros((3, model.nv), dtype=object if dual or base_pose.rot.dtype == object else float)
    col = 0
    if model.floating:
        Rb = base_pose.rot
        r = np.dot(Rb.T, p_w - base_pose.trans)
        J[:, 0:3] = Rb
        J[:, 3:6] = -np.dot(Rb, hat3(r))
        col = 6
    for ji in _ancestor_joints(model, f.link):
        j = model.joints[ji]
        jf = poses[j.parent].compose(j.placement)  # joint frame in world
        a_w = np.dot(jf.rot, j.axis)
        if j.kind == "revolute":
            J[:, col + ji] = cross3(a_w, p_w - jf.trans)
        else:
            J[:, col + ji] = a_w
    return J


def contact_jacobian(model, q: ch.GeneralizedConfig, frame, point_index=0):
    return contact_jacobian_raw(model, ch.base_to_pose(q.base), q.joints, frame, point_index)


# -- inverse dynamics --------------------------------------------------------


def rnea(model: RobotModel, base_pose: Se3Pose, qj, vvec, avec):
    """Recursive Newton-Euler: generalized force for given state and
    acceleration, gravity included, no external forces."""
    n = model.n_joints
    if model.floating:
        if len(vvec) != 6 + n or len(avec) != 6 + n:
            raise DimensionError("velocity/acceleration must have 6+n entries")
        base_v, base_w = vvec[0:3], vvec[3:6]
        qdot = vvec[6:]
        a_v0 = avec[0:3] - np.dot(base_pose.rot.T, model.gravity)
        a_w0 = avec[3:6]
        qdd = avec[6:]
    else:
        if len(vvec) != n or len(avec) != n:
            raise DimensionError("velocity/acceleration must have n entries")
        base_v = base_w = np.zeros(3)
        qdot, qdd = vvec, avec
        a_v0 = -np.dot(base_pose.rot.T, model.gravity)
        a_w0 = np.zeros(3)

    nl = len(model.links)
    w = [None] * nl
    v = [None] * nl
    aw = [None] * nl
    av = [None] * nl
    w[0], v[0] = np.asarray(base_w), np.asarray(base_v)
    aw[0], av[0] = np.asarray(a_w0), np.asarray(a_v0)

    for i, j in enumerate(model.joints):
        local = j.placement.compose(_joint_motion(j, qj[i]))
        R, t = local.rot, local.trans
        wp, vp = w[j.parent], v[j.parent]
        wc = np.dot(R.T, wp)
        vc = np.dot(R.T, vp + cross3(wp, t))
        awc = np.dot(R.T, aw[j.parent])
        avc = np.dot(R.T, av[j.parent] + cross3(aw[j.parent], t))
        s = np.asarray(j.axis)
        if j.kind == "revolute":
            wc = wc + s * qdot[i]
            # spatial cross v x S qdot with S = (axis, 0)
            awc = awc + s * qdd[i] + cross3(wc, s * qdot[i])
            avc = avc + cross3(vc, s * qdot[i])
        else:
            vc = vc + s * qdot[i]
            avc = avc + s * qdd[i] + cross3(wc, s * qdot[i])
        w[j.child], v[j.child] = wc, vc
        aw[j.child], av[j.child] = awc, avc

    # per-link net wrench (force, moment) at link origin, link frame
    fr = [None] * nl
    mo = [None] * nl
    for i, l in enumerate(model.links):
        c, m, Ic = l.com, l.mass, l.inertia
        h_lin = m * (v[i] + cross3(w[i], c))
        h_ang = np.dot(Ic, w[i]) + cross3(c, h_lin)
        f_lin = m * (av[i] + cross3(aw[i], c))
        n_ang = np.dot(Ic, aw[i]) + cross3(c, f_lin)
        fr[i] = f_lin + cross3(w[i], h_lin)
        mo[i] = n_ang + cross3(w[i], h_ang) + cross3(v[i], h_lin)

    tau = [None] * n
    for i in range(n - 1, -1, -1):
        j = model.joints[i]
        s = np.asarray(j.axis)
        if j.kind == "revolute":
            tau[i] = lg.dot3(s, mo[j.child])
        else:
            tau[i] = lg.dot3(s, fr[j.child])
        local = j.placement.compose(_joint_motion(j, qj[i]))
        R, t = local.rot, local.trans
        fp = np.dot(R, fr[j.child])
        fr[j.parent] = fr[j.parent] + fp
        mo[j.parent] = mo[j.parent] + np.dot(R, mo[j.child]) + cross3(t, fp)

    if model.floating:
        return lg._vec(list(fr[0]) + list(mo[0]) + tau)
    return lg._vec(tau) if n else np.zeros(0)


def inverse_dynamics_raw(model, base_pose, qj, vvec, avec, forces=()):
    """Generalized force  M a + C(q, v) - sum J^T lambda.

    ``forces`` is a sequence of (frame_name, point_index, world_force_3).
    """
    out = rnea(model, base_pose, qj, vvec, avec)
    for frame, pi, lam in forces:
        J = contact_jacobian_raw(model, base_pose, qj, frame, pi)
        out = out - np.dot(J.T, np.asarray(lam))
    return out


def inverse_dynamics(model, q: ch.GeneralizedConfig, v: ch.GeneralizedVel, a, forces=()):
    return inverse_dynamics_raw(model, ch.base_to_pose(q.base), q.joints,
                                v.as_vector(), np.asarray(a, dtype=float), forces)


def mass_matrix_raw(model, base_pose, qj):
    """Generalized inertia matrix assembled column-by-column from inverse
    dynamics differences (test support)."""
    nv = model.nv
    z = np.zeros(nv)
    bias = dm.values(rnea(model, base_pose, qj, z, z))
    M = np.zeros((nv, nv))
    for i in range(nv):
        e = np.zeros(nv)
        e[i] = 1.0
        M[:, i] = dm.values(rnea(model, base_pose, qj, z, e)) - bias
    return 0.5 * (M + M.T)


def mass_matrix(model, q: ch.GeneralizedConfig):
    return mass_matrix_raw(model, ch.base_to_pose(q.base), q.joints)
