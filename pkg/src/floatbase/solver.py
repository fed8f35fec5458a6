"""Augmented-Lagrangian Gauss-Newton solver for the transcribed problems.

Constraint rows carry two-sided bounds lo <= c(x) <= hi; variable bounds are
enforced by projection.  The merit function is the standard shifted-penalty
augmented Lagrangian

    phi(x) = ||res_f(x)||^2 + (rho/2) ||c(x) + lam/rho - P(c(x) + lam/rho)||^2

with P the projection onto [lo, hi].  Inner steps are damped Gauss-Newton on
phi with backtracking line search; outer updates move the multipliers when
feasibility improved and grow the penalty otherwise.

The solver is deliberately generic: it sees problems only through a small
protocol (``ProblemView`` adapts the transcription module; unit tests supply
hand-built quadratic fixtures through ``LinearProblem``).
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from . import transcription as tr
from .errors import DimensionError, EvaluationError, NonDifferentiablePoint, ParseError

_INF = float("inf")


# ---------------------------------------------------------------------------
# problem protocol
# ---------------------------------------------------------------------------

class ProblemView:
    """Adapter exposing an NlpProblem through the solver's protocol."""

    def __init__(self, nlp: tr.NlpProblem):
        self.nlp = nlp
        self.var_lo = nlp.var_lo
        self.var_hi = nlp.var_hi
        self.con_lo, self.con_hi = tr.constraint_bounds(nlp)
        self.counters = nlp.counters

    @property
    def n_vars(self):
        return self.nlp.n_vars

    def eval_all(self, x):
        return tr.evaluate(self.nlp, x)

    def derivs(self, x) -> tr.NlpDerivatives:
        return tr.jacobians(self.nlp, x)


@dataclass
class LinearProblem:
    """Dense linear-least-squares objective with linear constraint rows.

    objective = ||Af x + bf||^2,  con_lo <= Ac x + bc <= con_hi.
    """
    Af: np.ndarray
    bf: np.ndarray
    Ac: np.ndarray
    bc: np.ndarray
    con_lo: np.ndarray
    con_hi: np.ndarray
    var_lo: np.ndarray
    var_hi: np.ndarray
    counters: tr.EvalCounters = field(default_factory=tr.EvalCounters)

    @property
    def n_vars(self):
        return self.var_lo.size

    def eval_all(self, x):
        self.counters.objective += 1
        rf = np.dot(self.Af, x) + self.bf
        return float(np.dot(rf, rf)), np.dot(self.Ac, x) + self.bc

    def derivs(self, x):
        self.counters.jacobian += 1
        rf = np.dot(self.Af, x) + self.bf
        Jr = sparse.csr_matrix(self.Af)
        Jc = sparse.csr_matrix(self.Ac)
        return tr.NlpDerivatives(2.0 * np.dot(self.Af.T, rf), Jc, rf, Jr)


# ---------------------------------------------------------------------------
# options and stats
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SolverOptions:
    max_iterations: int = 200
    constraint_tol: float = 1e-6
    optimality_tol: float = 1e-6
    initial_penalty: float = 10.0
    penalty_growth: float = 10.0
    max_penalty: float = 1e12
    armijo: float = 1e-4
    line_search_shrink: float = 0.5
    line_search_trials: int = 12
    levenberg_init: float = 1e-6
    levenberg_grow: float = 10.0
    levenberg_shrink: float = 0.33
    inner_iteration_cap: int = 60
    divergence_trials: int = 10
    divergence_norm: float = 1e9
    debug_monotone: bool = False

    def __post_init__(self):
        if self.max_iterations < 1:
            raise DimensionError("max_iterations must be >= 1")
        if self.constraint_tol <= 0.0 or self.optimality_tol <= 0.0:
            raise DimensionError("tolerances must be positive")


@dataclass
class SolveStats:
    status: str                 # Solved | MaxIterations | Diverged | EvaluationError
    iterations: int
    objective_evals: int
    jacobian_evals: int
    final_objective: float
    final_violation: float
    wall_time: float


def _row_violation(c, lo, hi):
    if c.size == 0:
        return 0.0
    return max(0.0, float(np.max(np.maximum(lo - c, c - hi))))


def _shifted(c, lam, rho, lo, hi):
    t = c + lam / rho
    return t - np.clip(t, lo, hi)


def solve(prob, ws, opts: SolverOptions = SolverOptions()):
    """Returns (solution vector, multipliers, SolveStats)."""
    t0 = time.perf_counter()
    x = np.clip(np.asarray(ws, dtype=float), prob.var_lo, prob.var_hi)
    m = prob.con_lo.size
    lam = np.zeros(m)
    rho = opts.initial_penalty
    nu = opts.levenberg_init
    obj0 = prob.counters.objective
    jac0 = prob.counters.jacobian

    def stats(status, iters, obj, viol):
        return SolveStats(status, iters,
                          prob.counters.objective - obj0,
                          prob.counters.jacobian - jac0,
                          obj, viol, time.perf_counter() - t0)

    try:
        obj, c = prob.eval_all(x)
    except (NonDifferentiablePoint, EvaluationError, FloatingPointError):
        return x, lam, stats("EvaluationError", 0, _INF, _INF)
    viol = _row_violation(c, prob.con_lo, prob.con_hi)
    eta = max(0.1 / rho ** 0.1, opts.constraint_tol)
    omega = max(1.0 / rho, opts.optimality_tol)
    viol_outer = viol
    iters = 0
    inner_count = 0
    fails = 0
    d = None
    prev = None   # last accepted point with working derivatives
    status = "MaxIterations"

    while iters < opts.max_iterations:
        if d is None:
            try:
                d = prob.derivs(x)
            except (NonDifferentiablePoint, EvaluationError, FloatingPointError):
                # The step landed on a chart singularity.  Back off to the
                # previous point and force a shorter step; abort only when
                # even the warm start is non-differentiable.
                if prev is None:
                    status = "EvaluationError"
                    break
                x, obj, c, d = prev
                viol = _row_violation(c, prob.con_lo, prob.con_hi)
                nu *= opts.levenberg_grow
                fails += 1
                if fails >= opts.divergence_trials:
                    status = "Diverged"
                    break
            else:
                prev = (x, obj, c, d)
        r = _shifted(c, lam, rho, prob.con_lo, prob.con_hi)
        g = d.gradient + rho * d.jac_constraints.T.dot(r)
        pg = x - np.clip(x - g, prob.var_lo, prob.var_hi)
        pgn = float(np.max(np.abs(pg))) if pg.size else 0.0

        if viol <= opts.constraint_tol and pgn <= opts.optimality_tol:
            lam = rho * r      # implied multiplier at the accepted point
            status = "Solved"
            break
        if (pgn <= max(omega, opts.optimality_tol) or fails >= 3
                or inner_count >= opts.inner_iteration_cap):
            # subproblem solved to its tolerance (or stalled): outer update.
            # Escalating the penalty on an unsolved subproblem only makes the
            # next one harder, so the cap is a loose safety net, not the
            # normal trigger.  A multiplier update is preferred whenever the
            # violation is still shrinking at this penalty level.
            if viol <= opts.constraint_tol:
                # feasible to tolerance at a subproblem stationary point:
                # success in the sense used throughout (all task requirements
                # are constraint rows; the objective is regularization only)
                lam = rho * r
                status = "Solved"
                break
            if viol <= max(eta, 0.7 * viol_outer):
                lam = rho * r
                eta = max(eta / rho ** 0.9, opts.constraint_tol)
                omega = max(omega / rho, 0.1 * opts.optimality_tol)
            elif rho < opts.max_penalty:
                rho *= opts.penalty_growth
                eta = max(0.1 / rho ** 0.1, opts.constraint_tol)
                omega = max(1.0 / rho, 0.1 * opts.optimality_tol)
            else:
                status = "Diverged"
                break
            viol_outer = viol
            fails = 0
            inner_count = 0
            continue

        # damped Gauss-Newton step on the AL subproblem; equality rows stay
        # in the curvature term even when currently satisfied
        t = c + lam / rho
        active = np.nonzero((prob.con_lo == prob.con_hi)
                            | (t < prob.con_lo) | (t > prob.con_hi))[0]
        Ja = d.jac_constraints[active]
        H = (2.0 * (d.jac_objective.T.dot(d.jac_objective))
             + rho * (Ja.T.dot(Ja))).tocsc()
        # variables pinned or pressed against an active bound leave the
        # reduced system; solving over them and clipping afterwards would
        # wreck the step for everything coupled to them
        at_lo = (x <= prob.var_lo + 1e-12) & (g > 0.0)
        at_hi = (x >= prob.var_hi - 1e-12) & (g < 0.0)
        free = ~((prob.var_lo == prob.var_hi) | at_lo | at_hi)
        fidx = np.nonzero(free)[0]
        Hff = H[fidx][:, fidx].tocsc()
        gf = g[fidx]
        eye = sparse.identity(fidx.size, format="csc")
        phi = obj + 0.5 * rho * float(np.dot(r, r))
        accepted = False
        for _ in range(8):
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", MatrixRankWarning)
                    dxf = spsolve(Hff + nu * eye, -gf)
            except RuntimeError:
                nu *= opts.levenberg_grow
                continue
            if not np.all(np.isfinite(dxf)):
                nu *= opts.levenberg_grow
                continue
            dx = np.zeros(x.size)
            dx[fidx] = dxf
            alpha = 1.0
            for _ in range(opts.line_search_trials):
                xt = np.clip(x + alpha * dx, prob.var_lo, prob.var_hi)
                step = xt - x
                if float(np.max(np.abs(step))) == 0.0:
                    break
                try:
                    objt, ct = prob.eval_all(xt)
                except (NonDifferentiablePoint, EvaluationError, FloatingPointError):
                    alpha *= opts.line_search_shrink
                    continue
                rt = _shifted(ct, lam, rho, prob.con_lo, prob.con_hi)
                phit = objt + 0.5 * rho * float(np.dot(rt, rt))
                slope = float(np.dot(g, step))
                if np.isfinite(phit) and phit <= phi + opts.armijo * min(slope, 0.0):
                    if opts.debug_monotone:
                        assert phit <= phi + 1e-12
                    x, obj, c = xt, objt, ct
                    viol = _row_violation(c, prob.con_lo, prob.con_hi)
                    accepted = True
                    break
                alpha *= opts.line_search_shrink
            if accepted:
                break
            nu *= opts.levenberg_grow
        if accepted:
            iters += 1
            inner_count += 1
            fails = 0
            nu = max(nu * opts.levenberg_shrink, 1e-12)
            d = None
            if float(np.max(np.abs(x))) > opts.divergence_norm:
                status = "Diverged"
                break
        else:
            fails += 1
            if fails >= opts.divergence_trials:
                status = "Diverged"
                break

    return x, lam, stats(status, iters, obj, viol)


# ---------------------------------------------------------------------------
# independent optimality certificate
# ---------------------------------------------------------------------------

def kkt_residual(prob, x, lam):
    """(stationarity, feasibility, complementarity) infinity norms at (x, lam),
    computed from fresh evaluations."""
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    _, c = prob.eval_all(x)
    if lam.size != c.size:
        raise DimensionError(f"expected {c.size} multipliers, got {lam.size}")
    d = prob.derivs(x)
    gl = d.gradient + d.jac_constraints.T.dot(lam)
    pg = x - np.clip(x - gl, prob.var_lo, prob.var_hi)
    stationarity = float(np.max(np.abs(pg))) if pg.size else 0.0
    feasibility = _row_violation(c, prob.con_lo, prob.con_hi)
    bviol = np.maximum(prob.var_lo - x, x - prob.var_hi)
    if bviol.size:
        feasibility = max(feasibility, max(0.0, float(np.max(bviol))))
    comp = 0.0
    for i in range(c.size):
        if lam[i] == 0.0:
            continue
        slack_lo = c[i] - prob.con_lo[i] if np.isfinite(prob.con_lo[i]) else _INF
        slack_hi = prob.con_hi[i] - c[i] if np.isfinite(prob.con_hi[i]) else _INF
        slack = max(0.0, min(slack_lo, slack_hi))
        comp = max(comp, min(abs(lam[i]), slack))
    return stationarity, feasibility, comp


# ---------------------------------------------------------------------------
# portable problem export
# ---------------------------------------------------------------------------

_FORMAT_HEADER = "floatbase-nlp 1"


def _fmt(v):
    return repr(float(v))


def export_problem(prob, ws, destination, model_text=None, task_text=None,
                   chart_name=None):
    """Write a self-contained description of the problem and warm start.

    Robot problems embed the model/task documents so a reimport rebuilds the
    identical NLP; linear fixtures are written matrix-by-matrix.  The format
    is line-oriented text with a versioned header.
    """
    ws = np.asarray(ws, dtype=float)
    lines = [_FORMAT_HEADER]
    if isinstance(prob, ProblemView):
        if model_text is None or task_text is None or chart_name is None:
            raise ParseError("robot export needs model_text, task_text, chart_name")
        view = prob
        lines.append("kind robot")
        lines.append(f"chart {chart_name}")
        lines.append(f"vars {view.n_vars} cons {view.con_lo.size}")
        for tag, text in (("model", model_text), ("task", task_text)):
            body = text.splitlines()
            lines.append(f"{tag} {len(body)}")
            lines.extend(body)
        nlp = view.nlp
        lines.append("rows")
        for b in nlp.blocks:
            lines.append(f"{b.kind} {b.node} {b.rows}")
        lines.append("end")
    elif isinstance(prob, LinearProblem):
        lines.append("kind linear")
        lines.append(f"vars {prob.n_vars} cons {prob.con_lo.size} "
                     f"obj {prob.bf.size}")
        for tag, M in (("objA", prob.Af), ("conA", prob.Ac)):
            lines.append(tag)
            for row in M:
                lines.append(" ".join(_fmt(v) for v in row))
        lines.append("objb")
        lines.append(" ".join(_fmt(v) for v in prob.bf))
        lines.append("conb")
        lines.append(" ".join(_fmt(v) for v in prob.bc))
    else:
        raise ParseError(f"cannot export problem of type {type(prob).__name__}")

    lines.append("rowbounds")
    for lo, hi in zip(prob.con_lo, prob.con_hi):
        lines.append(f"{_fmt(lo)} {_fmt(hi)}")
    lines.append("varbounds")
    for lo, hi, w in zip(prob.var_lo, prob.var_hi, ws):
        lines.append(f"{_fmt(lo)} {_fmt(hi)} {_fmt(w)}")
    if isinstance(prob, ProblemView):
        lines.append("sparsity")
        d = tr.jacobians(prob.nlp, ws)
        csr = d.jac_constraints.tocsr()
        for r in range(csr.shape[0]):
            cols = csr.indices[csr.indptr[r]:csr.indptr[r + 1]]
            lines.append(" ".join(str(cc) for cc in sorted(cols)))
    lines.append("end")
    with open(destination, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def import_problem(path):
    """Rebuild (problem, warm start) from an exported document."""
    from . import charts as ch
    from . import rbd

    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _FORMAT_HEADER:
        raise ParseError("not a problem export document")
    pos = 1
    kind = lines[pos].split()[1]
    pos += 1
    if kind == "robot":
        chart = ch.ChartKind.from_name(lines[pos].split()[1])
        pos += 1
        pos += 1  # vars/cons line is informational
        texts = {}
        for tag in ("model", "task"):
            head = lines[pos].split()
            if head[0] != tag:
                raise ParseError(f"expected {tag} section")
            n = int(head[1])
            texts[tag] = "\n".join(lines[pos + 1:pos + 1 + n])
            pos += 1 + n
        model = rbd.load_model(texts["model"])
        task = tr.load_task(texts["task"])
        prob = ProblemView(tr.build_nlp(model, chart, task))
    elif kind == "linear":
        head = lines[pos].split()
        n, m, no = int(head[1]), int(head[3]), int(head[5])
        pos += 1

        def matrix(tag, rows):
            nonlocal pos
            if lines[pos] != tag:
                raise ParseError(f"expected {tag} section")
            pos += 1
            M = np.array([[float(v) for v in lines[pos + i].split()]
                          for i in range(rows)])
            pos += rows
            return M.reshape(rows, -1)

        Af = matrix("objA", no)
        Ac = matrix("conA", m)
        bf = matrix("objb", 1).ravel()
        bc = matrix("conb", 1).ravel()
        rb = _read_bounds(lines, pos, "rowbounds", m)
        vb = _read_bounds(lines, pos + 1 + m, "varbounds", n)
        return (LinearProblem(Af, bf, Ac, bc, rb[:, 0], rb[:, 1],
                              vb[:, 0], vb[:, 1]), vb[:, 2])
    else:
        raise ParseError(f"unknown export kind {kind!r}")

    # robot kind: skip to varbounds for the warm start
    while lines[pos] != "varbounds":
        pos += 1
    n = prob.n_vars
    ws = np.array([float(lines[pos + 1 + i].split()[2]) for i in range(n)])
    return prob, ws


def _read_bounds(lines, pos, tag, count):
    if lines[pos] != tag:
        raise ParseError(f"expected {tag} section")
    return np.array([[float(v) for v in lines[pos + 1 + i].split()]
                     for i in range(count)])
