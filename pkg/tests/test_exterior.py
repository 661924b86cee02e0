import numpy as np
import pytest
from math import comb, factorial

from cytorus.errors import DegreeOverflow, DimensionMismatch
from cytorus.exterior import (
    Form,
    basis,
    compound,
    hodge_star,
    inner,
    power,
    top_coef_of_power,
    wedge,
)
from cytorus.pointwise import omega_std


def rand_form(rng, d, k, shape=()):
    return Form(d, k, rng.standard_normal(tuple(shape) + (comb(d, k),)))


def test_basis_is_lexicographic():
    assert list(basis(4, 2)) == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


def test_graded_commutativity():
    rng = np.random.default_rng(0)
    for k, l in [(1, 1), (1, 2), (2, 2), (1, 3)]:
        a, b = rand_form(rng, 6, k), rand_form(rng, 6, l)
        assert np.allclose(wedge(a, b).c, (-1) ** (k * l) * wedge(b, a).c)


def test_wedge_associative_on_fields():
    rng = np.random.default_rng(1)
    a, b, c = (rand_form(rng, 5, 1, (3, 2)) for _ in range(3))
    assert np.allclose(wedge(wedge(a, b), c).c, wedge(a, wedge(b, c)).c)
    assert np.allclose(wedge(a, a).c, 0.0)


def test_wedge_broadcasts_constant_against_field():
    rng = np.random.default_rng(2)
    a = rand_form(rng, 4, 1, (7,))
    b = rand_form(rng, 4, 2)
    out = wedge(a, b)
    assert out.shape == (7,)
    assert np.allclose(out.c[3], wedge(Form(4, 1, a.c[3]), b).c)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_omega_power_is_n_factorial(n):
    W = Form.from_matrix(omega_std(n))
    assert top_coef_of_power(W, n) == pytest.approx(factorial(n))


def test_top_power_is_pfaffian_times_factorial():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((4, 4))
    B = X - X.T
    pf = B[0, 1] * B[2, 3] - B[0, 2] * B[1, 3] + B[0, 3] * B[1, 2]
    assert power(Form.from_matrix(B), 2).top() == pytest.approx(2 * pf)
    assert pf**2 == pytest.approx(np.linalg.det(B))


def test_matrix_roundtrip():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((3, 6, 6))
    B = X - np.swapaxes(X, -1, -2)
    assert np.allclose(Form.from_matrix(B).to_matrix(), B)


def test_errors():
    with pytest.raises(DimensionMismatch):
        Form(4, 2, np.zeros(5))
    with pytest.raises(DegreeOverflow):
        wedge(Form.zeros(2, 2), Form.zeros(2, 1))
    with pytest.raises(DimensionMismatch):
        wedge(Form.zeros(2, 1), Form.zeros(4, 1))
    with pytest.raises(DimensionMismatch):
        Form.zeros(4, 1).to_matrix()


def test_compound_is_multiplicative():
    rng = np.random.default_rng(5)
    A, B = rng.standard_normal((2, 4, 4))
    assert np.allclose(compound(A @ B, 2), compound(A, 2) @ compound(B, 2))
    assert np.allclose(compound(A, 4)[0, 0], np.linalg.det(A))


def test_hodge_star_defining_property():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((4, 4))
    G = X @ X.T + np.eye(4)
    vol = np.sqrt(np.linalg.det(G))
    for k in range(5):
        a, b = rand_form(rng, 4, k), rand_form(rng, 4, k)
        lhs = wedge(a, hodge_star(b, G)).top()
        assert lhs == pytest.approx(inner(a, b, G) * vol)


def test_double_star_sign():
    rng = np.random.default_rng(7)
    G = np.diag([1.0, 2.0, 3.0, 0.5])
    for k in range(5):
        a = rand_form(rng, 4, k)
        assert np.allclose(hodge_star(hodge_star(a, G), G).c, (-1) ** (k * (4 - k)) * a.c)
