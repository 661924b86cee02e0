import numpy as np
import pytest

from cytorus.errors import DimensionMismatch, NotAlmostComplex, ParameterOutOfRange
from cytorus.exterior import Form
from cytorus.fields import (
    ACSField,
    apply_J_to_form,
    d,
    dJd,
    dJd_matrix,
    hermitian_margin,
    hermitian_matrix,
    nijenhuis,
    project_types_matrix,
    synthetic_J,
    tau_H,
    torsion_part_matrix,
    unitary_frame,
)
from cytorus.grid import TorusGrid
from cytorus.pointwise import J_std, omega_std

TP = 2 * np.pi


@pytest.fixture(scope="module")
def g2():
    return TorusGrid(2, 8)


@pytest.fixture(scope="module")
def Jsyn(g2):
    return synthetic_J(g2, np.random.default_rng(3), amplitude=0.15)


@pytest.fixture(scope="module")
def fine():
    # the synthetic J is not band-limited; first-derivative formulas need m = 16
    g = TorusGrid(2, 16)
    J = synthetic_J(g, np.random.default_rng(3), amplitude=0.15)
    x = g.coords()
    phi = 0.1 * np.sin(TP * (x[0] + x[3])) + 0.05 * np.cos(TP * (x[1] - x[2]))
    return g, J, phi


def test_acs_validation(g2):
    with pytest.raises(NotAlmostComplex):
        ACSField(g2, np.eye(4))
    with pytest.raises(DimensionMismatch):
        ACSField(g2, J_std(1))
    with pytest.raises(ParameterOutOfRange):
        synthetic_J(g2)


def test_synthetic_J_is_compatible(g2, Jsyn):
    J = Jsyn.J
    assert J.shape == g2.shape + (4, 4)
    assert np.abs(J @ J + np.eye(4)).max() < 1e-12
    G = omega_std(2) @ J
    assert np.abs(G - np.swapaxes(G, -1, -2)).max() < 1e-12
    assert Jsyn.taming_margin().min() > 0


def test_J_on_one_forms():
    dx = Form(2, 1, np.array([1.0, 0.0]))
    assert np.allclose(apply_J_to_form(dx, J_std(1)).c, [0.0, 1.0])


def test_standard_dJd_is_laplacian_for_n1():
    g = TorusGrid(1, 16)
    x, y = g.coords()
    phi = np.sin(TP * x) * np.cos(TP * 2 * y)
    B = dJd(phi, g)
    assert np.abs(B.c[..., 0] - g.laplacian(phi)).max() < 1e-9


def test_dJd_constant_J_two_routes(g2):
    rng = np.random.default_rng(1)
    phi = g2.random_bandlimited(rng, 2)
    for J in (ACSField.standard(g2), ACSField(g2, np.linalg.solve(
            P := np.eye(4) + 0.1 * np.triu(np.ones((4, 4)), 1), J_std(2) @ P))):
        fourier = dJd(phi, g2, J)
        composed = d(apply_J_to_form(d(phi, g2), J), g2)
        assert np.abs(fourier.c - composed.c).max() < 1e-9


def test_dJd_synthetic_two_routes(g2, Jsyn):
    phi = g2.random_bandlimited(np.random.default_rng(2), 1)
    fourier = dJd(phi, g2, Jsyn)
    composed = d(apply_J_to_form(d(phi, g2), Jsyn), g2)
    assert np.abs(fourier.c - composed.c).max() < 1e-9


def test_dJd_is_closed(g2, Jsyn):
    phi = g2.random_bandlimited(np.random.default_rng(4), 2)
    assert np.abs(d(dJd(phi, g2, Jsyn), g2).c).max() < 1e-8


def test_type_projection(g2, Jsyn):
    phi = g2.random_bandlimited(np.random.default_rng(5), 2)
    B = dJd_matrix(phi, g2, Jsyn)
    p11, p2 = project_types_matrix(B, Jsyn.J)
    assert np.allclose(p11 + p2, B)
    JT = np.swapaxes(Jsyn.J, -1, -2)
    assert np.abs(JT @ p11 @ Jsyn.J - p11).max() < 1e-10
    assert np.abs(JT @ p2 @ Jsyn.J + p2).max() < 1e-10


def test_nijenhuis(g2, Jsyn):
    assert np.abs(nijenhuis(ACSField.standard(g2))).max() == 0.0
    N = nijenhuis(Jsyn)
    assert np.abs(N + np.swapaxes(N, -1, -2)).max() < 1e-12
    assert np.abs(N).max() > 1e-3


def test_torsion_part_matches_projection(fine):
    g, J, phi = fine
    B = dJd_matrix(phi, g, J)
    _, p2 = project_types_matrix(B, J.J)
    P = torsion_part_matrix(phi, g, J)
    assert np.abs(p2).max() > 0.1
    assert np.abs(P - p2).max() < 1e-8


def test_tau_H_reassemble(fine):
    g, J, phi = fine
    parts = tau_H(phi, g, J)
    total = parts["tau"].c + parts["H"].c + parts["tau"].conj().c
    ref = Form.from_matrix(omega_std(2) + dJd_matrix(phi, g, J)).c
    assert np.abs(total.imag).max() < 1e-12
    assert np.abs(total.real - ref).max() < 1e-8


def test_hermitian_margin_matches_real_route():
    rng = np.random.default_rng(8)
    from cytorus.pointwise import random_compatible_J
    from scipy.linalg import eigh

    J = random_compatible_J(2, rng)
    G = omega_std(2) @ J
    X = rng.standard_normal((4, 4))
    B = X - X.T
    p11, _ = project_types_matrix(B, J)
    H = omega_std(2) + 0.2 * p11
    Q = H @ J
    real = eigh(0.5 * (Q + Q.T), 0.5 * (G + G.T), eigvals_only=True)
    assert hermitian_margin(H, J) == pytest.approx(real[0], abs=1e-12)
    h = hermitian_matrix(H, J, G)
    assert np.allclose(np.sort(np.repeat(np.linalg.eigvalsh(h), 2)), real, atol=1e-12)


def test_unitary_frame():
    rng = np.random.default_rng(9)
    from cytorus.pointwise import random_compatible_J

    J = random_compatible_J(3, rng)
    G = omega_std(3) @ J
    E = unitary_frame(J, G)
    assert np.allclose(E.T @ G @ E, np.eye(6), atol=1e-12)
    assert np.allclose(J @ E, E @ J_std(3), atol=1e-12)
    assert np.allclose(E.T @ omega_std(3) @ E, omega_std(3), atol=1e-12)
