"""Benchmark harness: per-task chart comparison, warm-start-noise sweeps,
success classification, and report emission.

Reports are pure functions of (input files, seeds, options): wall-clock time
never enters a report file, so re-running a study yields byte-identical
output.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import charts as ch
from . import liegroups as lg
from . import rbd
from . import solver as sv
from . import transcription as tr
from .errors import AngleNearPiWarning, IoError, ValidationError

__all__ = [
    "RunReport",
    "NoiseStudyReport",
    "FeasibilityReport",
    "run_task",
    "run_matrix",
    "run_noise_study",
    "load_suite",
    "export_trajectory",
    "net_rotation",
    "final_position_error",
    "check_feasibility",
    "quartiles",
]


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunReport:
    task: str
    chart: str
    stats: sv.SolveStats
    success: str               # "Yes" | "No" | "ConvergedWrongBehavior"
    net_rotation: float        # rad about the task axis (0 when no such goal)
    position_error: float      # m (0 when the task has no position goal)

    def __post_init__(self):
        if self.success not in ("Yes", "No", "ConvergedWrongBehavior"):
            raise ValidationError(f"bad success flag {self.success!r}")


@dataclass(frozen=True)
class NoiseStudyReport:
    task: str
    chart: str
    sigmas: tuple              # noise levels
    replicates: int
    solved_counts: tuple       # per level, number with status Solved
    iteration_quartiles: tuple # per level, (q25, q50, q75) over solved runs
                               # or None when no run solved


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    worst: float               # largest violation found
    worst_kind: str


# ---------------------------------------------------------------------------
# achievement predicate
# ---------------------------------------------------------------------------

def net_rotation(chart, task, lay, x, axis):
    """Accumulated base rotation about ``axis``: sum of per-step log increments
    projected on the axis (a full turn counts as 2*pi, not 0)."""
    axis = np.asarray(axis, dtype=float)
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AngleNearPiWarning)
        for k in range(task.N - 1):
            Ra = np.asarray(ch.coords_to_pose(chart, x[lay.x_slice(k)]).rot,
                            dtype=float)
            Rb = np.asarray(ch.coords_to_pose(chart, x[lay.x_slice(k + 1)]).rot,
                            dtype=float)
            w = np.asarray(lg.log_so3(Ra.T.dot(Rb)), dtype=float)
            total += float(np.dot(axis, w))
    return total


def final_position_error(chart, task, lay, x):
    p = np.asarray(ch.coords_to_pose(chart, x[lay.x_slice(task.N - 1)]).trans,
                   dtype=float)
    return float(np.linalg.norm(p - np.asarray(task.goal.position, dtype=float)))


def _achieved(chart, task, lay, x):
    """(predicate, net rotation, position error)."""
    net = 0.0
    perr = 0.0
    ok = True
    axis, angle = task.goal.net_axis, task.goal.net_angle
    if task.ach_axis is not None:
        axis, angle = task.ach_axis, task.ach_angle
    if axis is not None:
        net = net_rotation(chart, task, lay, x, axis)
        ok = ok and abs(net - angle) <= task.net_rotation_tol
    if task.goal.position is not None:
        perr = final_position_error(chart, task, lay, x)
        ok = ok and perr <= task.position_tol
    return ok, net, perr


# ---------------------------------------------------------------------------
# independent feasibility checker
# ---------------------------------------------------------------------------

def check_feasibility(model, chart, task, x, tol):
    """Re-derives every physical requirement directly from the model and task
    (no NlpProblem machinery): torque windows with zero base rows, integration
    residuals, contact kinematics/stationarity, friction pyramid, and region
    bounds, each at tolerance ``tol``."""
    lay = tr.build_layout(model, chart, task)
    nj, nv, cd = lay.nj, lay.nv, lay.cd
    wscale = 1.0 / (model.total_mass * abs(model.gravity[2]))
    musc = task.mu / np.sqrt(2.0)
    worst = 0.0
    kind = "none"

    def bump(v, what):
        nonlocal worst, kind
        if v > worst:
            worst, kind = float(v), what

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AngleNearPiWarning)
        poses = [ch.coords_to_pose(chart, x[lay.x_slice(k)])
                 for k in range(task.N)]
        for k in range(task.N):
            q = x[lay.q_slice(k)]
            v = x[lay.v_slice(k)]
            a = x[lay.a_slice(k)]
            forces = []
            for j, s in enumerate(task.schedule[k]):
                forces.append((s.frame, s.point, x[lay.force_slice(k, j)]))
            tau = wscale * np.asarray(
                rbd.inverse_dynamics_raw(model, poses[k], q, v, a, forces),
                dtype=float)
            bump(np.max(np.abs(tau[0:6])), "base_wrench")
            lo = wscale * model.limits.tau_min
            hi = wscale * model.limits.tau_max
            bump(np.max(np.maximum(lo - tau[6:], tau[6:] - hi), initial=0.0),
                 "joint_torque")
            bump(np.max(np.maximum(model.limits.q_min - q,
                                   q - model.limits.q_max), initial=0.0),
                 "joint_limit")
            for j, s in enumerate(task.schedule[k]):
                c = x[lay.point_slice(k, j)]
                p = np.asarray(rbd.point_world(model, poses[k], q,
                                               s.frame, s.point), dtype=float)
                bump(np.max(np.abs(p - c)), "contact_fk")
                bump(np.max(np.maximum(s.region_lo - c, c - s.region_hi),
                            initial=0.0), "contact_region")
                f = x[lay.force_slice(k, j)]
                pyr = wscale * np.array(
                    [f[2],
                     musc * f[2] - f[0], musc * f[2] + f[0],
                     musc * f[2] - f[1], musc * f[2] + f[1]])
                bump(max(0.0, float(np.max(-pyr))), "friction")
                held = k > 0 and any(ps.frame == s.frame and ps.point == s.point
                                     for ps in task.schedule[k - 1])
                if held:
                    pv = np.asarray(rbd.point_velocity_raw(
                        model, poses[k], q, s.frame, s.point, v), dtype=float)
                    bump(np.max(np.abs(pv)), "contact_stationarity")
        for k in range(task.N - 1):
            bump(np.max(np.abs(x[lay.v_slice(k + 1)] - x[lay.v_slice(k)]
                               - task.h * x[lay.a_slice(k)])),
                 "vel_integration")
            bump(np.max(np.abs(x[lay.q_slice(k + 1)] - x[lay.q_slice(k)]
                               - task.h * x[lay.v_slice(k + 1)][6:]),
                        initial=0.0),
                 "joint_integration")
            twist = lg.Twist6.from_vector(x[lay.v_slice(k + 1)][0:6])
            res = np.asarray(ch.residual_integration(
                chart, x[lay.x_slice(k)], x[lay.x_slice(k + 1)],
                twist, task.h), dtype=float)
            bump(np.max(np.abs(res)), "base_integration")
    return FeasibilityReport(worst <= tol, worst, kind)


# ---------------------------------------------------------------------------
# quartiles
# ---------------------------------------------------------------------------

def quartiles(values):
    """(q25, q50, q75) by linear interpolation, or None for an empty list."""
    if len(values) == 0:
        return None
    q = np.percentile(np.asarray(values, dtype=float), [25.0, 50.0, 75.0],
                      method="linear")
    return (float(q[0]), float(q[1]), float(q[2]))


# ---------------------------------------------------------------------------
# single run
# ---------------------------------------------------------------------------

DEFAULT_OPTIONS = sv.SolverOptions(max_iterations=400,
                                   constraint_tol=1e-4,
                                   optimality_tol=1e-2)


def _solve_prepared(model, chart, task, opts, perturb=None):
    nlp = tr.build_nlp(model, chart, task)
    prob = sv.ProblemView(nlp)
    ws = tr.warmstart_neutral(model, chart, task)
    if task.hint is not None:
        ws = tr.warmstart_with_hint(ws, model, chart, task)
    if perturb is not None:
        sigma, seed = perturb
        ws = tr.perturb_warmstart(ws, nlp.layout, sigma, seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AngleNearPiWarning)
        x, lam, stats = sv.solve(prob, ws.vector, opts)
    return nlp, x, lam, stats


def run_task(model_file, task_file, chart, opts=DEFAULT_OPTIONS,
             export_path=None):
    """Solve one (model, task, chart) cell and classify the outcome."""
    model = rbd.load_model_file(model_file)
    task = tr.load_task_file(task_file)
    nlp, x, lam, stats = _solve_prepared(model, chart, task, opts)
    lay = nlp.layout
    achieved, net, perr = _achieved(chart, task, lay, x)
    if stats.status != "Solved":
        success = "No"
    elif achieved:
        # success=Yes additionally requires independently re-verified
        # feasibility (checker shares no solver code)
        rep = check_feasibility(model, chart, task, x,
                                10.0 * opts.constraint_tol)
        success = "Yes" if rep.feasible else "No"
    else:
        success = "ConvergedWrongBehavior"
    if export_path is not None:
        export_trajectory(model, chart, task, x, export_path)
    return RunReport(task.name, chart.value, stats, success, net, perr)


# ---------------------------------------------------------------------------
# matrix
# ---------------------------------------------------------------------------

def load_suite(path):
    """Suite file: one 'model_file task_file' pair per non-comment line,
    relative paths resolved against the suite file's directory."""
    base = os.path.dirname(os.path.abspath(path))
    rows = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split()
                if len(parts) != 2:
                    raise ValidationError(f"bad suite line: {line!r}")
                rows.append(tuple(os.path.join(base, p) if not os.path.isabs(p)
                                  else p for p in parts))
    except OSError as e:
        raise IoError(str(e)) from e
    return rows


def run_matrix(suite_file, out_dir, opts=DEFAULT_OPTIONS,
               charts=ch.ALL_CHARTS):
    """Every suite row under every chart, in deterministic order.  Per-cell
    failures are recorded as rows and do not stop the run.  Returns
    (reports, n_failed_cells)."""
    rows = load_suite(suite_file)
    os.makedirs(out_dir, exist_ok=True)
    reports = []
    failed = 0
    lines = ["task,chart,status,success,cost,iterations,"
             "objective_evals,jacobian_evals,violation"]
    for model_file, task_file in rows:
        for chart in charts:
            try:
                rep = run_task(model_file, task_file, chart, opts)
            except Exception as e:   # per-row failure tolerance
                failed += 1
                name = os.path.splitext(os.path.basename(task_file))[0]
                lines.append(f"{name},{chart.value},Error,No,,,,,"
                             f"  # {type(e).__name__}")
                continue
            reports.append(rep)
            s = rep.stats
            lines.append(f"{rep.task},{rep.chart},{s.status},{rep.success},"
                         f"{s.final_objective:.6e},{s.iterations},"
                         f"{s.objective_evals},{s.jacobian_evals},"
                         f"{s.final_violation:.3e}")
    out = os.path.join(out_dir, "matrix.csv")
    try:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as e:
        raise IoError(str(e)) from e
    return reports, failed


# ---------------------------------------------------------------------------
# noise study
# ---------------------------------------------------------------------------

def run_noise_study(model_file, task_file, charts, sigmas, replicates,
                    base_seed, out_dir=None, opts=DEFAULT_OPTIONS):
    """Warm-start-noise sweep.  Seeds are base_seed + replicate index; a run
    counts as a success when the solver status is Solved (convergence to a
    feasible point, not task achievement).  Iteration quartiles are computed
    over solved runs only.  Returns (reports, n_failed_solves)."""
    if replicates < 1:
        raise ValidationError("replicates must be >= 1")
    model = rbd.load_model_file(model_file)
    task = tr.load_task_file(task_file)
    reports = []
    failed = 0
    record_lines = ["task,chart,sigma,replicate,seed,status,iterations"]
    for chart in charts:
        counts = []
        quarts = []
        for sigma in sigmas:
            iters_solved = []
            solved = 0
            for rep_idx in range(replicates):
                seed = base_seed + rep_idx
                try:
                    _, _, _, stats = _solve_prepared(
                        model, chart, task, opts, perturb=(sigma, seed))
                except Exception:
                    failed += 1
                    record_lines.append(
                        f"{task.name},{chart.value},{sigma!r},{rep_idx},"
                        f"{seed},Error,")
                    continue
                record_lines.append(
                    f"{task.name},{chart.value},{sigma!r},{rep_idx},{seed},"
                    f"{stats.status},{stats.iterations}")
                if stats.status == "Solved":
                    solved += 1
                    iters_solved.append(stats.iterations)
            counts.append(solved)
            quarts.append(quartiles(iters_solved))
        reports.append(NoiseStudyReport(task.name, chart.value,
                                        tuple(sigmas), replicates,
                                        tuple(counts), tuple(quarts)))
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        try:
            with open(os.path.join(out_dir, "noise_records.csv"), "w",
                      encoding="utf-8") as fh:
                fh.write("\n".join(record_lines) + "\n")
            lines = ["task,chart,sigma,solved,replicates,q25,q50,q75"]
            for r in reports:
                for sigma, cnt, q in zip(r.sigmas, r.solved_counts,
                                         r.iteration_quartiles):
                    qs = ",," if q is None else \
                        f"{q[0]:g},{q[1]:g},{q[2]:g}"
                    if q is None:
                        qs = ",,"
                    lines.append(f"{r.task},{r.chart},{sigma!r},{cnt},"
                                 f"{r.replicates},{qs}")
            with open(os.path.join(out_dir, "noise_summary.csv"), "w",
                      encoding="utf-8") as fh:
                fh.write("\n".join(lines) + "\n")
        except OSError as e:
            raise IoError(str(e)) from e
    return reports, failed


# ---------------------------------------------------------------------------
# trajectory export
# ---------------------------------------------------------------------------

def export_trajectory(model, chart, task, x, path):
    """Columnar text, one block per node: time, base pose (rows of the 3x4
    pose matrix), chart coords, joints, velocity, acceleration, and per
    scheduled contact the force and point."""
    lay = tr.build_layout(model, chart, task)
    lines = [f"floatbase-traj 1 chart {chart.value} nodes {task.N} "
             f"timestep {task.h!r}"]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AngleNearPiWarning)
        for k in range(task.N):
            T = ch.coords_to_pose(chart, x[lay.x_slice(k)])
            R = np.asarray(T.rot, dtype=float)
            p = np.asarray(T.trans, dtype=float)
            lines.append(f"node {k} time {k * task.h!r}")
            for i in range(3):
                lines.append("pose " + " ".join(
                    repr(float(v)) for v in (*R[i], p[i])))
            lines.append("coords " + " ".join(
                repr(float(v)) for v in x[lay.x_slice(k)]))
            lines.append("joints " + " ".join(
                repr(float(v)) for v in x[lay.q_slice(k)]))
            lines.append("velocity " + " ".join(
                repr(float(v)) for v in x[lay.v_slice(k)]))
            lines.append("acceleration " + " ".join(
                repr(float(v)) for v in x[lay.a_slice(k)]))
            for j, s in enumerate(task.schedule[k]):
                lines.append(
                    f"contact {s.frame} {s.point} force "
                    + " ".join(repr(float(v)) for v in x[lay.force_slice(k, j)])
                    + " point "
                    + " ".join(repr(float(v)) for v in x[lay.point_slice(k, j)]))
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as e:
        raise IoError(str(e)) from e


def import_trajectory(path):
    """Inverse of export_trajectory: returns (chart, N, h, node dicts)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.rstrip("\n") for ln in fh]
    except OSError as e:
        raise IoError(str(e)) from e
    head = lines[0].split()
    if head[:2] != ["floatbase-traj", "1"]:
        raise ValidationError("not a floatbase trajectory file")
    chart = ch.ChartKind.from_name(head[3])
    n_nodes = int(head[5])
    h = float(head[7])
    nodes = []
    cur = None
    for ln in lines[1:]:
        parts = ln.split()
        if not parts:
            continue
        if parts[0] == "node":
            cur = {"time": float(parts[3]), "pose": [], "contacts": []}
            nodes.append(cur)
        elif parts[0] == "pose":
            cur["pose"].append([float(v) for v in parts[1:]])
        elif parts[0] in ("coords", "joints", "velocity", "acceleration"):
            cur[parts[0]] = np.array([float(v) for v in parts[1:]])
        elif parts[0] == "contact":
            cur["contacts"].append(
                {"frame": parts[1], "point": int(parts[2]),
                 "force": np.array([float(v) for v in parts[4:7]]),
                 "point_pos": np.array([float(v) for v in parts[8:11]])})
    if len(nodes) != n_nodes:
        raise ValidationError("node count mismatch")
    return chart, n_nodes, h, nodes
