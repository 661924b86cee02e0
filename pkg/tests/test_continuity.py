import numpy as np
import pytest

from cytorus.continuity import (
    STEP_MAX,
    ContinuationOptions,
    ContinuationTrace,
    StepRecord,
    continuity_solve,
    newton_solve_at,
    normalize_A,
    problem_at,
)
from cytorus.errors import ParameterOutOfRange, StepUnderflow, TamingLost
from cytorus.fields import ACSField
from cytorus.grid import TorusGrid
from cytorus.operator import F_op, MAProblem

TP = 2 * np.pi


def bump(n, m, amp=0.5):
    g = TorusGrid(n, m)
    x = g.coords()
    f = amp * np.cos(TP * x[0]) * np.cos(TP * x[1])
    return MAProblem(g, ACSField.standard(g), f)


def test_options_validation():
    with pytest.raises(ParameterOutOfRange):
        ContinuationOptions(s_step_init=0.01, s_step_min=0.1)
    with pytest.raises(ParameterOutOfRange):
        ContinuationOptions(newton_max=0)
    with pytest.raises(ParameterOutOfRange):
        ContinuationOptions(backtrack=1.0)


def test_normalize_A():
    p = bump(1, 16)
    assert normalize_A(p.f, 0.0, p.grid) == 1.0
    for s in (0.3, 1.0):
        A = normalize_A(p.f, s, p.grid)
        assert A * p.grid.integrate(np.exp(s * p.f)) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ParameterOutOfRange):
        normalize_A(p.f, 1.5, p.grid)
    q = problem_at(p, 0.5)
    assert np.allclose(q.f, 0.5 * p.f) and q.A == normalize_A(p.f, 0.5, p.grid)


def test_trace_is_strictly_increasing():
    tr = ContinuationTrace()
    rec = StepRecord(0.5, 1.0, 1, 0.0, 1.0, 0.0, 0.0)
    tr.append(rec)
    with pytest.raises(ValueError):
        tr.append(rec)
    assert tr.to_csv().splitlines()[0].startswith("s,A_s,newton_iters")


def test_newton_n1_matches_fourier_division():
    p = bump(1, 32)
    phi, rep = newton_solve_at(1.0, np.zeros(p.grid.shape), p)
    ref = p.grid.inverse_laplacian(p.A * np.exp(p.f) - 1.0)
    assert rep.iterations == 1
    assert np.abs(phi - ref).max() < 1e-12


def test_newton_rejects_non_taming_start():
    p = bump(1, 16)
    x, _ = p.grid.coords()
    with pytest.raises(TamingLost):
        newton_solve_at(0.5, 0.1 * np.cos(TP * x), p)


def test_trivial_path_single_step():
    g = TorusGrid(2, 8)
    res = continuity_solve(MAProblem(g, ACSField.standard(g), np.full(g.shape, 0.7)))
    assert res.trace.s_values == [1.0]
    assert not res.phi.any()


def test_bump_solve_n2():
    p = bump(2, 8, 0.4)
    res = continuity_solve(p, keep_states=True)
    s = res.trace.s_values
    assert s[-1] == 1.0 and len(s) == len(set(s))
    assert all(b > a for a, b in zip(s, s[1:]))
    assert np.abs(F_op(res.phi, p) - p.A * np.exp(p.f)).max() < 1e-10
    for r in res.trace.records:
        assert r.mass_defect <= 1e-10 and r.mean_phi <= 1e-12 and r.taming_margin > 0
    assert len(res.states) == len(s)


def test_step_growth_is_capped():
    p = bump(1, 16, 0.2)
    res = continuity_solve(p, ContinuationOptions(s_step_init=0.05))
    steps = np.diff([0.0] + res.trace.s_values)
    assert steps.max() <= STEP_MAX + 1e-12
    assert steps.max() > 0.05


def test_step_underflow():
    p = bump(1, 16)
    opts = ContinuationOptions(s_step_init=0.1, s_step_min=0.05, newton_max=1, newton_tol=1e-300)
    with pytest.raises(StepUnderflow) as info:
        continuity_solve(p, opts, monitor=None)
    assert info.value.trace.failures
    assert all(f["reason"] == "NewtonDiverged" for f in info.value.trace.failures)
