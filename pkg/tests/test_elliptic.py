import numpy as np
import pytest

from cytorus.elliptic import SolveOptions, solve_linearized
from cytorus.errors import NoConvergence, ParameterOutOfRange, RhsNotMeanZero
from cytorus.fields import ACSField
from cytorus.grid import TorusGrid
from cytorus.operator import LinearizedOperator, MAProblem


def op(n, m, amp):
    g = TorusGrid(n, m)
    p = MAProblem(g, ACSField.standard(g), np.zeros(g.shape))
    phi = g.random_bandlimited(np.random.default_rng(11), 2, amp)
    return LinearizedOperator(phi, p)


def test_options_validation():
    with pytest.raises(ParameterOutOfRange):
        SolveOptions(tol_rel=0.0)
    with pytest.raises(ParameterOutOfRange):
        SolveOptions(preconditioner="ilu")
    with pytest.raises(ParameterOutOfRange):
        SolveOptions(max_iter=0)


def test_laplacian_case_one_iteration():
    L = op(1, 16, 0.0)
    r = L.grid.random_bandlimited(np.random.default_rng(0), 3)
    u, rep = solve_linearized(L, r)
    assert rep.converged and rep.iterations <= 2
    assert np.abs(L.apply(u) - r).max() < 1e-9 * np.abs(r).max()


@pytest.mark.parametrize("prec", ["fourier-laplacian", "none"])
def test_variable_coefficients(prec):
    L = op(2, 8, 0.004)
    rng = np.random.default_rng(1)
    u_true = L.grid.random_bandlimited(rng, 2)
    r = L.apply(u_true)
    u, rep = solve_linearized(L, r, SolveOptions(preconditioner=prec, tol_rel=1e-11))
    assert rep.converged
    assert abs(L.grid.mean(u)) < 1e-14
    assert np.abs(u - u_true).max() < 1e-8


def test_preconditioner_reduces_iterations():
    L = op(2, 8, 0.004)
    r = L.apply(L.grid.random_bandlimited(np.random.default_rng(2), 3))
    _, a = solve_linearized(L, r, SolveOptions(preconditioner="fourier-laplacian"))
    _, b = solve_linearized(L, r, SolveOptions(preconditioner="none", restart=200))
    assert a.iterations < b.iterations


def test_rhs_must_be_mean_zero():
    L = op(1, 8, 0.0)
    with pytest.raises(RhsNotMeanZero):
        solve_linearized(L, np.ones(L.grid.shape))


def test_zero_rhs():
    L = op(1, 8, 0.01)
    u, rep = solve_linearized(L, np.zeros(L.grid.shape))
    assert rep.iterations == 0 and not u.any()


def test_budget_exhausted_carries_iterate():
    L = op(2, 8, 0.004)
    r = L.apply(L.grid.random_bandlimited(np.random.default_rng(3), 3))
    with pytest.raises(NoConvergence) as info:
        solve_linearized(L, r, SolveOptions(preconditioner="none", max_iter=2, tol_rel=1e-14))
    assert info.value.u is not None and info.value.u.shape == L.grid.shape
