"""The Monge-Ampere type operator ``F(phi) = (omega + dJd phi)^n / omega^n``,
its type components and its linearization."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange, NotElliptic, ParameterOutOfRange
from .exterior import Form, _complement, power, wedge
from .fields import (
    ACSField,
    complex_projector,
    dJd,
    dJd_matrix,
    hermitian_margin,
    nijenhuis,
    project_types_matrix,
    torsion_part_matrix,
)
from .grid import TorusGrid
from .pointwise import omega_std


@dataclass
class MAProblem:
    grid: TorusGrid
    J: ACSField
    f: np.ndarray
    A: float = None
    omega: np.ndarray = None
    _N: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        g = self.grid
        if self.omega is None:
            self.omega = omega_std(g.n)
        self.omega = np.asarray(self.omega, float)
        if self.omega.shape != (g.d, g.d):
            raise DimensionMismatch("background omega must be a constant 2n x 2n matrix")
        self.f = np.asarray(self.f, float)
        if self.f.shape != g.shape:
            raise DimensionMismatch(f"f of shape {self.f.shape} on grid {g}")
        if not isinstance(self.J, ACSField):
            self.J = ACSField(g, self.J)
        if self.A is None:
            self.A = self.normalizing_constant(self.f)
        if not self.A > 0:
            raise ParameterOutOfRange(f"A must be positive, got {self.A}")
        if np.min(self.J.taming_margin(self.omega)) <= 0:
            raise ParameterOutOfRange("omega does not tame J")

    @property
    def n(self):
        return self.grid.n

    @property
    def volume(self):
        """``int omega^n`` (coefficient times unit-torus volume)."""
        return float(power(Form.from_matrix(self.omega), self.n).top())

    def normalizing_constant(self, f):
        return 1.0 / self.grid.integrate(np.exp(f))

    @property
    def N(self):
        if self._N is None:
            self._N = nijenhuis(self.J)
        return self._N

    def omega_phi(self, phi):
        """``omega + dJd phi`` as a matrix field."""
        return self.omega + dJd_matrix(phi, self.grid, self.J)


def omega_phi_form(phi, prob: MAProblem) -> Form:
    B = dJd(phi, prob.grid, prob.J)
    return Form(B.d, 2, B.c + Form.from_matrix(prob.omega).c)


def F_op(phi, prob: MAProblem) -> np.ndarray:
    """Pointwise ratio ``omega(phi)^n / omega^n`` via the top wedge coefficient."""
    n = prob.n
    return power(omega_phi_form(phi, prob), n).top() / power(Form.from_matrix(prob.omega), n).top()


def F_op_det(phi, prob: MAProblem) -> np.ndarray:
    """Determinant evaluation, valid for J-invariant ``omega(phi)``.

    The real eigenvalues of ``G^{-1} Q`` with ``Q = omega(phi)(., J.)`` come
    in equal pairs; their product over one member of each pair is F.
    """
    Wphi = prob.omega_phi(phi)
    JJ = prob.J.J
    G = prob.omega @ JJ
    Q = Wphi @ JJ
    M = np.linalg.solve(np.broadcast_to(G, Q.shape), Q)
    ev = np.sort(np.linalg.eigvals(M).real, axis=-1)
    return np.prod(ev[..., ::2], axis=-1)


@dataclass
class OperatorState:
    F: np.ndarray
    margin: float
    non_taming: bool


def evaluate(phi, prob: MAProblem) -> OperatorState:
    """F together with the taming margin and the non-taming flag."""
    F = F_op(phi, prob)
    margin = taming_margin(phi, prob)
    return OperatorState(F=F, margin=margin, non_taming=not margin > 0)


def H_matrix(phi, prob: MAProblem):
    """``omega + (dJd phi)^{1,1}`` as a matrix field."""
    p11, _ = project_types_matrix(dJd_matrix(phi, prob.grid, prob.J), prob.J.J)
    return prob.omega + p11


def tau_H_matrices(phi, prob: MAProblem):
    H = H_matrix(phi, prob)
    P = torsion_part_matrix(phi, prob.grid, prob.J, prob.N if not prob.J.constant else None)
    Pi = complex_projector(prob.J.J)
    tau = np.swapaxes(Pi, -1, -2) @ P @ Pi
    return tau, H


def F_component(phi, j: int, prob: MAProblem) -> np.ndarray:
    n = prob.n
    if not isinstance(j, (int, np.integer)) or not 0 <= j <= n // 2:
        raise IndexOutOfRange(f"component index must lie in 0..{n // 2}, got {j}")
    tau, H = tau_H_matrices(phi, prob)
    tau = Form.from_matrix(tau)
    Hf = Form.from_matrix(np.broadcast_to(H, tau.c.shape[:-1] + H.shape[-2:]))
    tt = wedge(tau, tau.conj())
    top = wedge(power(tt, j), power(Hf, n - 2 * j)).top()
    coef = factorial(n) / (factorial(j) ** 2 * factorial(n - 2 * j))
    base = power(Form.from_matrix(prob.omega), n).top()
    return (coef * top / base).real


def F_components(phi, prob: MAProblem):
    return [F_component(phi, j, prob) for j in range(prob.n // 2 + 1)]


def hermitian_margin_field(phi, prob: MAProblem):
    H = H_matrix(phi, prob)
    H = np.broadcast_to(H, prob.grid.shape + H.shape[-2:])
    return hermitian_margin(H, prob.J.J)


def taming_margin(phi, prob: MAProblem) -> float:
    """Minimum over the grid of the smallest eigenvalue of ``H(phi)``."""
    return float(np.min(hermitian_margin_field(phi, prob)))


class LinearizedOperator:
    """``u -> n omega(phi)^{n-1} ^ dJd u / omega^n`` with frozen coefficients."""

    def __init__(self, phi, prob: MAProblem, check: bool = True):
        self.prob = prob
        self.grid = prob.grid
        n, d = prob.n, prob.grid.d
        if check:
            margin = taming_margin(phi, prob)
            if not margin > 0:
                raise NotElliptic(f"omega(phi) does not tame J (margin {margin:.3e})")
        Pn1 = power(omega_phi_form(phi, prob), n - 1)
        comp, sign = _complement(d, 2)
        base = power(Form.from_matrix(prob.omega), n).top()
        # K_J = n * coef(omega(phi)^{n-1} ^ e_J) / coef(omega^n)
        self.K = (n / base) * Pn1.c[..., comp] * sign
        self.K_matrix = Form(d, 2, self.K).to_matrix()

    def apply(self, u):
        return np.sum(self.K * dJd(u, self.grid, self.prob.J).c, axis=-1)

    __call__ = apply

    def wave_response(self, k_vec):
        """``L(cos(2 pi k.x))`` projected back onto the same wave, averaged."""
        x = self.grid.coords()
        wave = np.cos(2 * np.pi * sum(kk * xx for kk, xx in zip(k_vec, x)))
        Lw = self.apply(wave)
        return float(self.grid.integrate(Lw * wave) / self.grid.integrate(wave * wave))


def linearize(phi, prob: MAProblem) -> LinearizedOperator:
    return LinearizedOperator(phi, prob)
