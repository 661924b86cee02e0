"""Path following along ``F(phi_s) = A_s exp(s f)`` from s = 0 to s = 1."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field

import numpy as np

from .elliptic import SolveOptions, solve_linearized
from .errors import (
    NewtonDiverged,
    NoConvergence,
    NotElliptic,
    ParameterOutOfRange,
    StepUnderflow,
    TamingLost,
)
from .operator import F_op, LinearizedOperator, MAProblem, taming_margin

TRACE_COLUMNS = ("s", "A_s", "newton_iters", "residual_inf", "taming_margin",
                 "laplacian_max", "S_max")
STEP_MAX = 0.25


@dataclass
class ContinuationOptions:
    s_step_init: float = 0.1
    s_step_min: float = 1e-4
    newton_tol: float = 1e-10
    newton_max: int = 30
    backtrack: float = 0.5
    max_halvings: int = 20
    linear: SolveOptions = field(default_factory=SolveOptions)

    def __post_init__(self):
        if not 0 < self.s_step_min <= self.s_step_init <= 1:
            raise ParameterOutOfRange("need 0 < s_step_min <= s_step_init <= 1")
        if not self.newton_tol > 0 or self.newton_max < 1:
            raise ParameterOutOfRange("invalid Newton controls")
        if not 0 < self.backtrack < 1 or self.max_halvings < 0:
            raise ParameterOutOfRange("invalid line-search controls")


@dataclass
class NewtonReport:
    iterations: int
    residuals: list
    margin: float
    linear_iterations: int = 0


@dataclass
class StepRecord:
    s: float
    A_s: float
    newton_iters: int
    residual_inf: float
    taming_margin: float
    laplacian_max: float
    S_max: float
    mass_defect: float = 0.0
    mean_phi: float = 0.0


@dataclass
class ContinuationTrace:
    records: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def append(self, rec: StepRecord):
        if self.records and not rec.s > self.records[-1].s:
            raise ValueError("trace must be strictly increasing in s")
        self.records.append(rec)

    @property
    def s_values(self):
        return [r.s for r in self.records]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.records:
            w.writerow([repr(float(getattr(r, c))) if c != "newton_iters" else r.newton_iters
                        for c in TRACE_COLUMNS])
        return buf.getvalue()

    def as_list(self):
        return [asdict(r) for r in self.records]


def normalize_A(f, s: float, grid) -> float:
    """``A_s`` with ``A_s * int exp(s f) = int 1`` on the grid quadrature."""
    if not 0.0 <= s <= 1.0:
        raise ParameterOutOfRange(f"s must lie in [0, 1], got {s}")
    if s == 0.0:
        return 1.0
    return float(1.0 / grid.integrate(np.exp(s * np.asarray(f))))


def problem_at(prob: MAProblem, s: float) -> MAProblem:
    """The problem solved at path parameter ``s``: data ``s f`` and ``A_s``."""
    return MAProblem(prob.grid, prob.J, s * prob.f, A=normalize_A(prob.f, s, prob.grid),
                     omega=prob.omega, _N=prob._N)


def _target(prob, s):
    A_s = normalize_A(prob.f, s, prob.grid)
    return A_s, A_s * np.exp(s * prob.f)


def newton_solve_at(s: float, phi_init, prob: MAProblem, opts: ContinuationOptions = None):
    """Newton iteration for ``F(phi) = A_s exp(s f)`` starting at ``phi_init``.

    Returns ``(phi, NewtonReport)``. Trial points must keep the taming margin
    positive and reduce the max-norm residual.
    """
    opts = opts or ContinuationOptions()
    grid = prob.grid
    _, target = _target(prob, s)
    phi = np.array(phi_init, float)
    phi -= grid.mean(phi)
    margin = taming_margin(phi, prob)
    if not margin > 0:
        raise TamingLost(f"initial state is not taming (margin {margin:.3e})", phi)
    res = F_op(phi, prob) - target
    rnorm = float(np.abs(res).max())
    history = [rnorm]
    lin_its = 0
    it = 0
    while rnorm > opts.newton_tol:
        if it >= opts.newton_max:
            raise NewtonDiverged(f"no convergence in {it} Newton steps (residual {rnorm:.3e})",
                                 phi, NewtonReport(it, history, margin, lin_its))
        try:
            Lop = LinearizedOperator(phi, prob, check=False)
            rhs = -(res - grid.mean(res))
            delta, rep = solve_linearized(Lop, rhs, opts.linear)
            lin_its += rep.iterations
        except NoConvergence as exc:
            delta = exc.u
            lin_its += exc.report.iterations
        except NotElliptic as exc:
            raise TamingLost(str(exc), phi) from exc
        lam = 1.0
        accepted = False
        lost_taming = False
        for _ in range(opts.max_halvings + 1):
            trial = phi + lam * delta
            trial -= grid.mean(trial)
            m_trial = taming_margin(trial, prob)
            if m_trial > 0:
                r_trial = F_op(trial, prob) - target
                n_trial = float(np.abs(r_trial).max())
                if n_trial < rnorm:
                    phi, res, rnorm, margin = trial, r_trial, n_trial, m_trial
                    accepted = True
                    break
            else:
                lost_taming = True
            lam *= opts.backtrack
        it += 1
        if not accepted:
            report = NewtonReport(it, history, margin, lin_its)
            if lost_taming:
                raise TamingLost("line search could not stay inside the taming cone", phi, report)
            raise NewtonDiverged(f"line search failed at residual {rnorm:.3e}", phi, report)
        history.append(rnorm)
    return phi, NewtonReport(it, history, margin, lin_its)


def default_monitor(phi, prob):
    """Trace snapshot: largest trace of ``h(a)`` minus n and max third-order S."""
    from .estimates import second_order_monitor, third_order_S

    lap = second_order_monitor(phi, prob)["laplacian_max"]
    S = float(third_order_S(phi, prob).max()) if prob.J.constant else float("nan")
    return lap, S


@dataclass
class ContinuationResult:
    phi: np.ndarray
    trace: ContinuationTrace
    states: list = None


def continuity_solve(prob: MAProblem, opts: ContinuationOptions = None, monitor=default_monitor,
                     keep_states: bool = False, log=None) -> ContinuationResult:
    """Follow the path from ``phi = 0`` at ``s = 0`` to ``s = 1``.

    Step control: halve on Newton failure or loss of taming, double after two
    consecutive steps needing at most one Newton iteration, never exceed 0.25
    after growth and never drop below ``s_step_min``.
    """
    opts = opts or ContinuationOptions()
    grid = prob.grid
    phi = np.zeros(grid.shape)
    trace = ContinuationTrace()
    states = [] if keep_states else None
    s = 0.0
    step = opts.s_step_init
    easy = 0
    f = prob.f
    if np.all(f == f.flat[0]):
        step = 1.0  # exp(s f) is constant after normalization: trivial path
    while s < 1.0:
        s_next = s + step
        if s_next > 1.0 - 1e-12:
            s_next = 1.0
        try:
            phi_new, rep = newton_solve_at(s_next, phi, prob, opts)
        except (NewtonDiverged, TamingLost) as exc:
            trace.failures.append({"s": s_next, "step": step, "reason": type(exc).__name__,
                                   "message": str(exc)})
            step *= 0.5
            easy = 0
            if log:
                log(f"step rejected at s={s_next:.6f}: {type(exc).__name__}; step -> {step:.3e}")
            if step < opts.s_step_min:
                raise StepUnderflow(f"s step fell below {opts.s_step_min} at s={s:.6f}",
                                    phi, trace) from exc
            continue
        s = s_next
        phi = phi_new
        A_s = normalize_A(f, s, grid)
        lap, S = monitor(phi, problem_at(prob, s)) if monitor else (float("nan"), float("nan"))
        F = F_op(phi, prob)
        rec = StepRecord(
            s=float(s), A_s=A_s, newton_iters=rep.iterations,
            residual_inf=rep.residuals[-1], taming_margin=rep.margin,
            laplacian_max=lap, S_max=S,
            mass_defect=float(abs(grid.integrate(F) - 1.0)),
            mean_phi=float(abs(grid.mean(phi))),
        )
        trace.append(rec)
        if keep_states:
            states.append((s, phi.copy()))
        if log:
            log(f"s={s:.6f} A_s={A_s:.12g} newton={rep.iterations} res={rec.residual_inf:.3e}")
        easy = easy + 1 if rep.iterations <= 1 else 0
        if easy >= 2:
            step = min(2.0 * step, STEP_MAX)
            easy = 0
    return ContinuationResult(phi=phi, trace=trace, states=states)
