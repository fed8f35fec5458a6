"""Direct transcription of floating-base trajectory tasks into a sparse NLP.

Decision variables per node k = 0..N-1:

    [base coords (chart dim) | joints | generalized velocity | acceleration]

followed, for every scheduled contact (frame, point) at node k, by a world
contact force 3-vector and a world contact-point 3-vector.  Physics enters
through inverse dynamics: at every node the generalized force computed from
(q, v, a, forces) must have zero base rows and joint rows inside the torque
limits.  Integration constraints use the semi-implicit Euler rule, with the
base residual expressed in the active chart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import charts as ch
from . import diff as dm
from . import liegroups as lg
from . import rbd
from .errors import DimensionError, ParseError, ScheduleError, ValidationError

_INF = float("inf")


# ---------------------------------------------------------------------------
# task specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContactSpot:
    """One scheduled contact: a point of a contact frame plus its allowed
    world-region box (z is pinned to the ground height)."""
    frame: str
    point: int
    region_lo: np.ndarray    # (3,) box lower corner; region_lo[2] == ground z
    region_hi: np.ndarray


@dataclass(frozen=True)
class GoalSpec:
    position: np.ndarray | None = None     # world target for the base origin
    position_tol: float = 0.0              # half-width of the equality band, m
    orientation: lg.Se3Pose | None = None  # rotation target (translation ignored)
    orientation_tol: float = 0.0           # rad
    net_axis: np.ndarray | None = None     # accumulated-rotation goal axis
    net_angle: float = 0.0                 # rad about net_axis


@dataclass(frozen=True)
class HintSpec:
    """Mid-trajectory base-orientation override for the warm start."""
    node_start: int
    node_end: int            # inclusive
    rotation: np.ndarray     # 3x3


@dataclass(frozen=True)
class TaskSpec:
    name: str
    N: int
    h: float
    schedule: tuple          # length N; schedule[k] = tuple of ContactSpot
    goal: GoalSpec
    w_config: float
    w_accel: float
    mu: float
    start_pose: lg.Se3Pose
    q_ref: np.ndarray
    hint: HintSpec | None = None
    net_rotation_tol: float = 0.3   # achievement tolerance, rad
    position_tol: float = 0.05      # achievement tolerance, m
    # achievement-only net-rotation target: measured when classifying the
    # outcome but never turned into constraint rows (a converged solve that
    # misses it is "converged wrong behavior"); defaults to the goal's
    # net-rotation when absent
    ach_axis: np.ndarray | None = None
    ach_angle: float = 0.0

    def __post_init__(self):
        if self.N < 2:
            raise ValidationError("task needs at least two nodes")
        if self.h <= 0.0:
            raise ValidationError("timestep must be positive")
        if self.w_config < 0.0 or self.w_accel < 0.0:
            raise ValidationError("cost weights must be non-negative")
        if len(self.schedule) != self.N:
            raise ValidationError("contact schedule must cover every node")


def _region_from_doc(doc, name):
    lo = np.empty(3)
    hi = np.empty(3)
    for i, axis in enumerate("xy"):
        pair = doc.get(axis, [-_INF, _INF])
        lo[i], hi[i] = float(pair[0]), float(pair[1])
    ground = float(doc.get("z", 0.0))
    lo[2] = hi[2] = ground
    if np.any(lo > hi):
        raise ValidationError(f"contact region for {name} has lo > hi")
    return lo, hi


def load_task(text: str) -> TaskSpec:
    """Parse a task document (YAML)."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ParseError(f"invalid task document: {e}") from e
    if not isinstance(doc, dict):
        raise ParseError("task document must be a mapping")
    try:
        name = doc.get("name", "unnamed")
        N = int(doc["nodes"])
        h = float(doc["timestep"])
        weights = doc.get("weights", {})
        w_config = float(weights.get("config", 0.0))
        w_accel = float(weights.get("accel", 0.0))
        mu = float(doc.get("friction", 0.7))
        start = doc.get("start", {})
        start_pose = lg.Se3Pose(lg.rpy_to_rot(start.get("rpy", [0, 0, 0])),
                                np.asarray(start.get("xyz", [0, 0, 0]), dtype=float))
        q_ref = np.asarray(start.get("joints", []), dtype=float)

        schedule = [[] for _ in range(N)]
        for phase in doc.get("phases", []):
            k0, k1 = (int(v) for v in phase["nodes"])
            if not (0 <= k0 <= k1 < N):
                raise ValidationError(f"phase nodes [{k0}, {k1}] outside horizon")
            for cdoc in phase.get("contacts", []):
                frame = cdoc["frame"]
                lo, hi = _region_from_doc(cdoc.get("region", {}), frame)
                for p in cdoc.get("points", [0]):
                    spot = ContactSpot(frame, int(p), lo, hi)
                    for k in range(k0, k1 + 1):
                        schedule[k].append(spot)

        gdoc = doc.get("goal", {})
        position = orientation = net_axis = None
        position_tol = orientation_tol = net_angle = 0.0
        if "position" in gdoc:
            position = np.asarray(gdoc["position"]["xyz"], dtype=float)
            position_tol = float(gdoc["position"].get("tol", 0.0))
        if "orientation" in gdoc:
            orientation = lg.Se3Pose(lg.rpy_to_rot(gdoc["orientation"]["rpy"]),
                                     np.zeros(3))
            orientation_tol = float(gdoc["orientation"].get("tol", 0.0))
        if "net_rotation" in gdoc:
            axis = np.asarray(gdoc["net_rotation"]["axis"], dtype=float)
            net_axis = axis / np.linalg.norm(axis)
            net_angle = float(gdoc["net_rotation"]["angle"])
        goal = GoalSpec(position, position_tol, orientation, orientation_tol,
                        net_axis, net_angle)

        hint = None
        if "hint" in doc:
            hdoc = doc["hint"]
            k0, k1 = (int(v) for v in hdoc["nodes"])
            hint = HintSpec(k0, k1, lg.rpy_to_rot(hdoc["rpy"]))

        achieve = doc.get("achievement", {})
        ach_axis = None
        ach_angle = 0.0
        if "net_rotation" in achieve:
            axis = np.asarray(achieve["net_rotation"]["axis"], dtype=float)
            ach_axis = axis / np.linalg.norm(axis)
            ach_angle = float(achieve["net_rotation"]["angle"])
        return TaskSpec(name, N, h, tuple(tuple(s) for s in schedule), goal,
                        w_config, w_accel, mu, start_pose, q_ref, hint,
                        float(achieve.get("net_rotation_tol", 0.3)),
                        float(achieve.get("position_tol", 0.05)),
                        ach_axis, ach_angle)
    except KeyError as e:
        raise ParseError(f"missing required field {e}") from e


def load_task_file(path) -> TaskSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return load_task(fh.read())


# ---------------------------------------------------------------------------
# variable layout
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Layout:
    """Offsets of every variable slot in the flat decision vector."""
    chart: ch.ChartKind
    N: int
    nj: int
    node_offset: np.ndarray           # (N,) start of each node's state block
    force_offset: dict                # (k, spot index) -> offset of 3-vector
    point_offset: dict                # (k, spot index) -> offset of 3-vector
    n_vars: int

    @property
    def cd(self):
        return ch.chart_dim(self.chart)

    @property
    def nv(self):
        return 6 + self.nj

    def x_slice(self, k):
        o = self.node_offset[k]
        return slice(o, o + self.cd)

    def q_slice(self, k):
        o = self.node_offset[k] + self.cd
        return slice(o, o + self.nj)

    def v_slice(self, k):
        o = self.node_offset[k] + self.cd + self.nj
        return slice(o, o + self.nv)

    def a_slice(self, k):
        o = self.node_offset[k] + self.cd + self.nj + self.nv
        return slice(o, o + self.nv)

    def force_slice(self, k, j):
        o = self.force_offset[(k, j)]
        return slice(o, o + 3)

    def point_slice(self, k, j):
        o = self.point_offset[(k, j)]
        return slice(o, o + 3)


def build_layout(model: rbd.RobotModel, chart: ch.ChartKind, task: TaskSpec) -> Layout:
    cd = ch.chart_dim(chart)
    nj = model.n_joints
    nv = 6 + nj
    stride = cd + nj + 2 * nv
    node_offset = np.arange(task.N) * stride
    off = task.N * stride
    force_offset = {}
    point_offset = {}
    for k in range(task.N):
        for j, _ in enumerate(task.schedule[k]):
            force_offset[(k, j)] = off
            point_offset[(k, j)] = off + 3
            off += 6
    return Layout(chart, task.N, nj, node_offset, force_offset, point_offset, off)


# ---------------------------------------------------------------------------
# constraint blocks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstraintBlock:
    """A group of constraint rows sharing one evaluator.

    ``fun`` maps the gathered sub-vector x[cols] to the row values; if
    ``linear`` is set it holds (A, b) with values = A @ x[cols] + b and the
    Jacobian is taken from A directly instead of differentiating.
    """
    kind: str
    node: int
    rows: int
    lo: np.ndarray
    hi: np.ndarray
    cols: np.ndarray
    fun: object
    linear: tuple | None = None


@dataclass(frozen=True)
class ResidualBlock:
    """One weighted least-squares term of the objective: weight * fun(x[cols])."""
    kind: str
    node: int
    rows: int
    weight: float                     # multiplies the residual (already sqrt'd)
    cols: np.ndarray
    fun: object
    linear: tuple | None = None


class EvalCounters:
    """Objective/Jacobian evaluation tallies (reported in benchmark tables)."""

    def __init__(self):
        self.objective = 0
        self.jacobian = 0


@dataclass(frozen=True)
class NlpProblem:
    model: rbd.RobotModel
    chart: ch.ChartKind
    task: TaskSpec
    layout: Layout
    blocks: tuple                     # ConstraintBlock, fixed order
    residuals: tuple                  # ResidualBlock
    var_lo: np.ndarray
    var_hi: np.ndarray
    counters: EvalCounters = field(default_factory=EvalCounters, compare=False)

    @property
    def n_vars(self):
        return self.layout.n_vars

    @property
    def n_cons(self):
        return sum(b.rows for b in self.blocks)


def _idx(sl: slice):
    return np.arange(sl.start, sl.stop)


def _cat_idx(*slices):
    return np.concatenate([_idx(s) for s in slices])


def build_nlp(model: rbd.RobotModel, chart: ch.ChartKind, task: TaskSpec) -> NlpProblem:
    """Assemble all constraint blocks, objective residuals, and bounds."""
    if model.n_joints != task.q_ref.size:
        raise DimensionError(
            f"task reference posture has {task.q_ref.size} joints, model has {model.n_joints}")
    for spots in task.schedule:
        for s in spots:
            f = model.contact_frame(s.frame)   # raises UnknownFrameError
            if not (0 <= s.point < f.points.shape[0]):
                raise ScheduleError(
                    f"contact frame {s.frame!r} has no point {s.point}")

    lay = build_layout(model, chart, task)
    N, nj, nv, cd = task.N, lay.nj, lay.nv, lay.cd
    h = task.h
    lim = model.limits
    blocks = []

    x_ref = ch.pose_to_coords(chart, task.start_pose)

    # --- torque window: ID(q, v, a, lambda) with zero base rows -----------
    # Dynamics and friction rows are expressed in units of body weight so
    # every constraint row has comparable magnitude; mixing newton-scale and
    # meter-scale rows cripples the penalty solves downstream.
    wscale = 1.0 / (model.total_mass * abs(model.gravity[2]))
    tq_lo = wscale * np.concatenate([np.zeros(6), lim.tau_min])
    tq_hi = wscale * np.concatenate([np.zeros(6), lim.tau_max])
    for k in range(N):
        spots = task.schedule[k]
        cols = [lay.x_slice(k), lay.q_slice(k), lay.v_slice(k), lay.a_slice(k)]
        cols += [lay.force_slice(k, j) for j in range(len(spots))]

        def torque_fun(z, spots=spots):
            x = z[0:cd]
            qj = z[cd:cd + nj]
            v = z[cd + nj:cd + nj + nv]
            a = z[cd + nj + nv:cd + nj + 2 * nv]
            forces = []
            o = cd + nj + 2 * nv
            for s in spots:
                forces.append((s.frame, s.point, z[o:o + 3]))
                o += 3
            T = ch.coords_to_pose(chart, x)
            return wscale * rbd.inverse_dynamics_raw(model, T, qj, v, a, forces)

        blocks.append(ConstraintBlock("torque", k, nv, tq_lo, tq_hi,
                                      _cat_idx(*cols), torque_fun))

    # --- integration (semi-implicit): velocities then configurations ------
    eye = np.eye(nv)
    A_vel = np.hstack([eye, -eye, -h * eye])  # v_next - v - h a = 0
    for k in range(N - 1):
        cols = _cat_idx(lay.v_slice(k + 1), lay.v_slice(k), lay.a_slice(k))
        A = A_vel.copy()

        def vel_fun(z, A=A):
            return np.dot(A, z)

        blocks.append(ConstraintBlock("vel_integration", k, nv,
                                      np.zeros(nv), np.zeros(nv), cols,
                                      vel_fun, linear=(A, np.zeros(nv))))

    rdim = len(ch.residual_integration(chart, x_ref, x_ref, lg.Twist6.zero(), h))
    for k in range(N - 1):
        cols = _cat_idx(lay.x_slice(k), lay.x_slice(k + 1), lay.v_slice(k + 1))

        def base_fun(z):
            twist = lg.Twist6.from_vector(z[2 * cd:2 * cd + 6])
            return ch.residual_integration(chart, z[0:cd], z[cd:2 * cd], twist, h)

        blocks.append(ConstraintBlock("base_integration", k, rdim,
                                      np.zeros(rdim), np.zeros(rdim),
                                      cols, base_fun))

    if nj > 0:
        ej = np.eye(nj)
        A_j = np.hstack([ej, -ej, -h * ej])   # q_next - q - h qd_next = 0
        for k in range(N - 1):
            qd_next = lay.v_slice(k + 1)
            qd_next = slice(qd_next.start + 6, qd_next.stop)
            cols = _cat_idx(lay.q_slice(k + 1), lay.q_slice(k), qd_next)

            def joint_fun(z, A=A_j):
                return np.dot(A, z)

            blocks.append(ConstraintBlock("joint_integration", k, nj,
                                          np.zeros(nj), np.zeros(nj), cols,
                                          joint_fun, linear=(A_j, np.zeros(nj))))

    # --- contact kinematics, stationarity, friction ------------------------
    musc = task.mu / math.sqrt(2.0)
    # friction pyramid rows: z; z*mu/sqrt2 -/+ x; z*mu/sqrt2 -/+ y  (all >= 0),
    # in body-weight units like the torque rows
    A_fr = wscale * np.array([[0.0, 0.0, 1.0],
                              [-1.0, 0.0, musc],
                              [1.0, 0.0, musc],
                              [0.0, -1.0, musc],
                              [0.0, 1.0, musc]])
    fr_lo = np.zeros(5)
    fr_hi = np.full(5, _INF)
    for k in range(N):
        for j, s in enumerate(task.schedule[k]):
            cols = _cat_idx(lay.x_slice(k), lay.q_slice(k), lay.point_slice(k, j))

            def fk_fun(z, s=s):
                T = ch.coords_to_pose(chart, z[0:cd])
                p = rbd.point_world(model, T, z[cd:cd + nj], s.frame, s.point)
                return p - z[cd + nj:cd + nj + 3]

            blocks.append(ConstraintBlock("contact_fk", k, 3,
                                          np.zeros(3), np.zeros(3), cols, fk_fun))

            # Stationarity only where the same contact was already closed at
            # the previous node.  The touchdown node keeps its kinematic and
            # friction rows but its velocity is set by the preceding flight
            # dynamics, so zero point velocity there would demand an impulse
            # the discretization cannot produce.
            held = k > 0 and any(p.frame == s.frame and p.point == s.point
                                 for p in task.schedule[k - 1])
            if held:
                cols = _cat_idx(lay.x_slice(k), lay.q_slice(k), lay.v_slice(k))

                def stat_fun(z, s=s):
                    T = ch.coords_to_pose(chart, z[0:cd])
                    return rbd.point_velocity_raw(model, T, z[cd:cd + nj],
                                                  s.frame, s.point,
                                                  z[cd + nj:cd + nj + nv])

                blocks.append(ConstraintBlock("contact_stationarity", k, 3,
                                              np.zeros(3), np.zeros(3),
                                              cols, stat_fun))

            cols = _idx(lay.force_slice(k, j))

            def fr_fun(z, A=A_fr):
                return np.dot(A, z)

            blocks.append(ConstraintBlock("friction", k, 5, fr_lo, fr_hi,
                                          cols, fr_fun, linear=(A_fr, np.zeros(5))))

    # --- quaternion unit norm ----------------------------------------------
    if cd == 7:
        norm_nodes = range(N) if chart is ch.ChartKind.Quat3 else (0,)
        for k in norm_nodes:
            xs = lay.x_slice(k)
            cols = np.arange(xs.start + 3, xs.start + 7)

            def norm_fun(z):
                return np.array([np.dot(z, z) - 1.0])

            blocks.append(ConstraintBlock("quat_norm", k, 1,
                                          np.zeros(1), np.zeros(1), cols, norm_fun))

    # --- terminal goal ------------------------------------------------------
    goal = task.goal
    last = N - 1
    if goal.position is not None:
        cols = _idx(lay.x_slice(last))
        target = goal.position
        tol = goal.position_tol

        def pos_fun(z, target=target):
            T = ch.coords_to_pose(chart, z)
            return T.trans - target

        blocks.append(ConstraintBlock("goal_position", last, 3,
                                      np.full(3, -tol), np.full(3, tol),
                                      cols, pos_fun))
    if goal.orientation is not None:
        cols = _idx(lay.x_slice(last))
        Rg = goal.orientation.rot
        tol = goal.orientation_tol

        def rot_fun(z, Rg=Rg):
            T = ch.coords_to_pose(chart, z)
            return lg.log_so3(np.dot(Rg.T, T.rot))

        blocks.append(ConstraintBlock("goal_orientation", last, 3,
                                      np.full(3, -tol), np.full(3, tol),
                                      cols, rot_fun))
    if goal.net_axis is not None:
        cols = np.concatenate([_idx(lay.x_slice(k)) for k in range(N)])
        axis = goal.net_axis
        angle = goal.net_angle

        def net_fun(z, axis=axis):
            total = 0.0
            R_prev = None
            for k in range(N):
                T = ch.coords_to_pose(chart, z[k * cd:(k + 1) * cd])
                if R_prev is not None:
                    step = lg.log_so3(np.dot(np.transpose(R_prev), T.rot))
                    total = total + np.dot(axis, step)
                R_prev = T.rot
            return np.array([total - angle])

        blocks.append(ConstraintBlock("goal_net_rotation", last, 1,
                                      np.zeros(1), np.zeros(1), cols, net_fun))

    # --- variable bounds ----------------------------------------------------
    var_lo = np.full(lay.n_vars, -_INF)
    var_hi = np.full(lay.n_vars, _INF)
    for k in range(N):
        var_lo[lay.q_slice(k)] = lim.q_min
        var_hi[lay.q_slice(k)] = lim.q_max
        vs = lay.v_slice(k)
        var_lo[vs.start + 6:vs.stop] = lim.qd_min
        var_hi[vs.start + 6:vs.stop] = lim.qd_max
        for j, s in enumerate(task.schedule[k]):
            ps = lay.point_slice(k, j)
            var_lo[ps] = s.region_lo
            var_hi[ps] = s.region_hi
    # initial condition pinned: start pose, reference posture, rest
    var_lo[lay.x_slice(0)] = var_hi[lay.x_slice(0)] = x_ref
    var_lo[lay.q_slice(0)] = var_hi[lay.q_slice(0)] = task.q_ref
    var_lo[lay.v_slice(0)] = var_hi[lay.v_slice(0)] = 0.0

    # --- objective residuals ------------------------------------------------
    residuals = []
    ddim = ch.diff_dim(chart)
    if task.w_config > 0.0:
        w = math.sqrt(task.w_config)
        for k in range(N):
            cols = _idx(lay.x_slice(k))

            def cfg_fun(z, x_ref=x_ref):
                return ch.base_difference(chart, z, x_ref)

            residuals.append(ResidualBlock("config_base", k, ddim, w, cols, cfg_fun))
            if nj > 0:
                cols = _idx(lay.q_slice(k))
                Aq = np.eye(nj)

                def cfgj_fun(z, q_ref=task.q_ref):
                    return z - q_ref

                residuals.append(ResidualBlock("config_joints", k, nj, w, cols,
                                               cfgj_fun, linear=(Aq, -task.q_ref)))
    if task.w_accel > 0.0:
        w = math.sqrt(task.w_accel)
        Aa = np.eye(nv)
        for k in range(N):
            cols = _idx(lay.a_slice(k))

            def acc_fun(z):
                return z

            residuals.append(ResidualBlock("accel", k, nv, w, cols, acc_fun,
                                           linear=(Aa, np.zeros(nv))))

    return NlpProblem(model, chart, task, lay, tuple(blocks), tuple(residuals),
                      var_lo, var_hi)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def evaluate(nlp: NlpProblem, x):
    """Objective value and stacked constraint values at x."""
    x = np.asarray(x, dtype=float)
    if x.size != nlp.n_vars:
        raise DimensionError(f"expected {nlp.n_vars} variables, got {x.size}")
    nlp.counters.objective += 1
    obj = 0.0
    for r in nlp.residuals:
        v = r.fun(x[r.cols])
        obj += r.weight * r.weight * float(np.dot(v, v))
    vals = np.empty(nlp.n_cons)
    o = 0
    for b in nlp.blocks:
        vals[o:o + b.rows] = b.fun(x[b.cols]).astype(float)
        o += b.rows
    return obj, vals


def objective_residuals(nlp: NlpProblem, x):
    """Stacked weighted objective residuals (objective = sum of squares)."""
    x = np.asarray(x, dtype=float)
    parts = [r.weight * np.asarray(r.fun(x[r.cols]), dtype=float)
             for r in nlp.residuals]
    if not parts:
        return np.zeros(0)
    return np.concatenate(parts)


@dataclass(frozen=True)
class NlpDerivatives:
    gradient: np.ndarray         # objective gradient
    jac_constraints: object      # scipy.sparse.csr_matrix, n_cons x n_vars
    res_objective: np.ndarray    # weighted residual vector
    jac_objective: object        # sparse residual Jacobian


def _block_jacobian(block, sub):
    if block.linear is not None:
        return np.asarray(block.linear[0], dtype=float)
    return dm.jacobian_ad(block.fun, sub)


def jacobians(nlp: NlpProblem, x) -> NlpDerivatives:
    """Sparse constraint Jacobian, objective residual Jacobian, and gradient."""
    from scipy import sparse

    x = np.asarray(x, dtype=float)
    nlp.counters.jacobian += 1

    rows, cols, data = [], [], []
    o = 0
    for b in nlp.blocks:
        J = _block_jacobian(b, x[b.cols])
        r, c = np.nonzero(J)
        rows.append(o + r)
        cols.append(b.cols[c])
        data.append(J[r, c])
        o += b.rows
    Jc = sparse.csr_matrix(
        (np.concatenate(data) if data else np.zeros(0),
         (np.concatenate(rows) if rows else np.zeros(0, dtype=int),
          np.concatenate(cols) if cols else np.zeros(0, dtype=int))),
        shape=(nlp.n_cons, nlp.n_vars))

    rrows, rcols, rdata, rvals = [], [], [], []
    o = 0
    for rb in nlp.residuals:
        sub = x[rb.cols]
        v = rb.weight * np.asarray(rb.fun(sub), dtype=float)
        J = rb.weight * _block_jacobian(rb, sub)
        r, c = np.nonzero(J)
        rrows.append(o + r)
        rcols.append(rb.cols[c])
        rdata.append(J[r, c])
        rvals.append(v)
        o += rb.rows
    n_res = o
    Jr = sparse.csr_matrix(
        (np.concatenate(rdata) if rdata else np.zeros(0),
         (np.concatenate(rrows) if rrows else np.zeros(0, dtype=int),
          np.concatenate(rcols) if rcols else np.zeros(0, dtype=int))),
        shape=(n_res, nlp.n_vars))
    res = np.concatenate(rvals) if rvals else np.zeros(0)
    grad = 2.0 * Jr.T.dot(res)
    return NlpDerivatives(grad, Jc, res, Jr)


def constraint_bounds(nlp: NlpProblem):
    lo = np.concatenate([b.lo for b in nlp.blocks])
    hi = np.concatenate([b.hi for b in nlp.blocks])
    return lo, hi


def constraint_violation(nlp: NlpProblem, x):
    """Infinity norm of constraint and variable-bound violation at x."""
    _, vals = evaluate(nlp, x)
    lo, hi = constraint_bounds(nlp)
    viol = np.maximum(lo - vals, vals - hi)
    bviol = np.maximum(nlp.var_lo - x, x - nlp.var_hi)
    worst = 0.0
    if viol.size:
        worst = max(worst, float(np.max(viol)))
    if bviol.size:
        worst = max(worst, float(np.max(bviol)))
    return max(worst, 0.0)


# ---------------------------------------------------------------------------
# warm starts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Warmstart:
    vector: np.ndarray


def warmstart_neutral(model: rbd.RobotModel, chart: ch.ChartKind,
                      task: TaskSpec) -> Warmstart:
    """Every node in the reference stance, at rest, weight shared equally
    among that node's scheduled contacts."""
    lay = build_layout(model, chart, task)
    x = np.zeros(lay.n_vars)
    coords = ch.pose_to_coords(chart, task.start_pose)
    weight = model.total_mass * abs(model.gravity[2])
    for k in range(task.N):
        x[lay.x_slice(k)] = coords
        x[lay.q_slice(k)] = task.q_ref
        spots = task.schedule[k]
        for j, s in enumerate(spots):
            p = rbd.point_world(model, task.start_pose, task.q_ref, s.frame, s.point)
            x[lay.point_slice(k, j)] = np.asarray(p, dtype=float)
            x[lay.force_slice(k, j)] = [0.0, 0.0, weight / len(spots)]
    return Warmstart(x)


def warmstart_with_hint(ws: Warmstart, model: rbd.RobotModel,
                        chart: ch.ChartKind, task: TaskSpec) -> Warmstart:
    """Thread the hinted mid-flight orientation through the warm start.

    The base orientation ramps from the last contact node before the hint up
    to the hinted rotation, holds it over the hinted range, and keeps turning
    at the same per-node rate until the next contact phase, where it snaps
    back to the stance orientation.  Angular velocity is set to match the
    ramp so the velocity rows start near-consistent.
    """
    if task.hint is None:
        return ws
    lay = build_layout(model, chart, task)
    x = ws.vector.copy()
    k0, k1 = task.hint.node_start, task.hint.node_end
    w_h = np.asarray(lg.log_so3(np.asarray(task.hint.rotation, dtype=float)),
                     dtype=float)
    theta = float(np.linalg.norm(w_h))
    axis = w_h / theta if theta > 0.0 else np.array([0.0, 1.0, 0.0])
    contact_nodes = [k for k in range(task.N) if task.schedule[k]]
    before = [k for k in contact_nodes if k < k0]
    after = [k for k in contact_nodes if k > k1]
    ka = max(before) if before else 0
    kb = min(after) if after else task.N - 1
    ramp = max(k0 - ka, 1)
    rate = theta / (ramp * task.h)          # rad/s about the hint axis
    R0 = np.asarray(task.start_pose.rot, dtype=float)
    for k in range(ka + 1, kb):
        if k <= k0:
            ang = theta * (k - ka) / ramp
        elif k <= k1:
            ang = theta
        else:
            ang = theta * (1.0 + (k - k1) / ramp)
        old = ch.coords_to_pose(chart, x[lay.x_slice(k)])
        R = R0.dot(np.asarray(lg.exp_so3(axis * ang)))
        x[lay.x_slice(k)] = ch.pose_to_coords(chart, lg.Se3Pose(R, old.trans))
        if k <= k0 or k > k1:
            x[lay.v_slice(k)][3:6] = axis * rate
    return Warmstart(x)


def perturb_warmstart(ws: Warmstart, lay: Layout, sigma: float,
                      seed: int) -> Warmstart:
    """Add i.i.d. Gaussian noise, then re-normalize quaternion blocks."""
    if sigma < 0.0:
        raise ValidationError("noise level must be non-negative")
    if sigma == 0.0:
        return Warmstart(ws.vector.copy())
    rng = np.random.default_rng(seed)
    x = ws.vector + rng.normal(0.0, sigma, ws.vector.size)
    if lay.cd == 7:
        for k in range(lay.N):
            xs = lay.x_slice(k)
            x[xs.start + 3:xs.start + 7] = lg.quat_normalize(x[xs.start + 3:xs.start + 7])
    return Warmstart(x)
