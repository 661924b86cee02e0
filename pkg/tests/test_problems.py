import numpy as np
import pytest

from cytorus.errors import ConfigError, ParameterOutOfRange
from cytorus.grid import TorusGrid
from cytorus.operator import F_op, taming_margin
from cytorus.problems import (
    BUILTINS,
    Wave,
    builtin_problem,
    eval_expression,
    manufactured,
    n1_closed_form,
    parse_expression,
)

TP = 2 * np.pi


def test_parse_expression():
    waves = parse_expression("0.2*cos(x1 + 2*y1) - 0.1*sin(-y2) + 0.3", 2)
    assert waves == [Wave(0.2, "cos", (1, 2, 0, 0)), Wave(-0.1, "sin", (0, 0, 0, -1)),
                     Wave(0.3, "const", (0, 0, 0, 0))]
    assert parse_expression("-sin(x1 - y1)", 1) == [Wave(-1.0, "sin", (1, -1))]


@pytest.mark.parametrize("bad", ["sin(x3)", "cos(x1", "0.5*tan(x1)", "1.5*sin(0.5*x1)",
                                 "sin(x1) 2", "sin()", ""])
def test_parse_errors(bad):
    with pytest.raises(ConfigError):
        parse_expression(bad, 2)


def test_eval_expression():
    g = TorusGrid(1, 16)
    x, y = g.coords()
    u = eval_expression("0.5*cos(x1 + 2*y1) + 1", g)
    assert np.allclose(u, 0.5 * np.cos(TP * (x + 2 * y)) + 1)


def test_manufactured_recovers_margin():
    g = TorusGrid(2, 8)
    mf = manufactured(g, seed=3, margin=0.4)
    assert mf.margin == pytest.approx(0.4, abs=1e-9)
    assert taming_margin(mf.phi_star, mf.problem) == pytest.approx(0.4, abs=1e-9)
    assert mf.problem.A == 1.0
    assert np.abs(F_op(mf.phi_star, mf.problem) - np.exp(mf.problem.f)).max() < 1e-14
    with pytest.raises(ParameterOutOfRange):
        manufactured(g, margin=1.2)


def test_n1_closed_form():
    g = TorusGrid(1, 32)
    x, y = g.coords()
    f = 0.3 * np.sin(TP * x) * np.cos(TP * y)
    phi = n1_closed_form(f, g)
    A = 1 / g.integrate(np.exp(f))
    assert np.abs(1 + g.laplacian(phi) - A * np.exp(f)).max() < 1e-12
    with pytest.raises(ParameterOutOfRange):
        n1_closed_form(np.zeros((8,) * 4), TorusGrid(2, 8))


@pytest.mark.parametrize("name", BUILTINS)
def test_builtins(name):
    prob, phi_star = builtin_problem(name, 2, 8)
    assert prob.grid.m == 8
    assert (phi_star is None) == (name in ("zero", "bump"))
    if name == "manufactured-n1":
        assert prob.n == 1


def test_builtin_errors():
    with pytest.raises(ConfigError):
        builtin_problem("nope", 1, 8)
    with pytest.raises(ConfigError):
        builtin_problem("zero", 1, 8, J_kind="weird")
    prob, _ = builtin_problem("zero", 2, 8, J_kind="synthetic")
    assert not prob.J.constant
