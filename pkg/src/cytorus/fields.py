"""Field-level exterior calculus on the torus: J-action, dd^c, type splitting,
Nijenhuis tensor and the torsion/Hermitian parts of ``omega + dJd phi``."""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, NotAlmostComplex, ParameterOutOfRange
from .exterior import Form, basis, exterior_d, wedge
from .grid import TorusGrid
from .pointwise import J_std, omega_std


class ACSField:
    """Almost complex structure on the grid; ``J`` is ``(d, d)`` or ``(*grid, d, d)``."""

    def __init__(self, grid: TorusGrid, J, tol: float = 1e-10):
        J = np.asarray(J, float)
        d = grid.d
        if J.shape not in ((d, d), grid.shape + (d, d)):
            raise DimensionMismatch(f"J of shape {J.shape} on grid {grid}")
        err = np.abs(J @ J + np.eye(d)).max()
        if err > tol * max(1.0, np.abs(J).max() ** 2):
            raise NotAlmostComplex(f"J^2 + I has size {err:.2e}")
        self.grid = grid
        self.J = J
        self.constant = J.ndim == 2

    @classmethod
    def standard(cls, grid):
        return cls(grid, J_std(grid.n))

    @property
    def field(self):
        """``J`` broadcast to full grid shape."""
        return np.broadcast_to(self.J, self.grid.shape + (self.grid.d,) * 2)

    @property
    def mean(self):
        if self.constant:
            return self.J
        return self.J.mean(axis=self.grid.axes)

    def metric(self, omega=None):
        W = omega_std(self.grid.n) if omega is None else omega
        return W @ self.J

    def taming_margin(self, omega=None):
        """Pointwise smallest eigenvalue of the symmetric part of ``omega(., J.)``."""
        G = self.metric(omega)
        return np.linalg.eigvalsh(0.5 * (G + np.swapaxes(G, -1, -2)))[..., 0]


def synthetic_J(grid: TorusGrid, rng=None, amplitude: float = 0.2, kmax: int = 1, S=None):
    """Non-integrable compatible J = P^{-1} J_std P with P the Cayley transform
    of the Hamiltonian field ``J_std S(x)``, ``S`` symmetric and band-limited."""
    d = grid.d
    if S is None:
        if rng is None:
            raise ParameterOutOfRange("synthetic_J needs rng or S")
        raw = grid.random_bandlimited(rng, kmax=kmax, amplitude=1.0, components=(d, d))
        S = 0.5 * (raw + np.swapaxes(raw, -1, -2))
        S = S * (amplitude / max(np.abs(S).max(), 1e-300))
    X = J_std(grid.n) @ S
    I = np.eye(d)
    P = (I + 0.5 * X) @ np.linalg.inv(I - 0.5 * X)
    return ACSField(grid, np.linalg.solve(P, J_std(grid.n) @ P))


def _asJ(J, grid):
    if isinstance(J, ACSField):
        return J
    if J is None:
        return ACSField.standard(grid)
    return ACSField(grid, J)


def d(field, grid: TorusGrid):
    """Exterior derivative of a scalar array (returns a 1-form) or a Form."""
    if isinstance(field, Form):
        return exterior_d(field, grid.deriv)
    return Form(grid.d, 1, grid.grad(field))


def apply_J_to_form(alpha: Form, J) -> Form:
    """``(J alpha)(X) = -alpha(J X)``; so ``J_std dx = dy``."""
    if alpha.k != 1:
        raise DimensionMismatch("J acts here on 1-forms")
    JJ = J.J if isinstance(J, ACSField) else np.asarray(J)
    if JJ.shape[-1] != alpha.d:
        raise DimensionMismatch(f"J of size {JJ.shape[-1]} vs 1-form on R^{alpha.d}")
    return Form(alpha.d, 1, -np.einsum("...ba,...b->...a", JJ, alpha.c))


def dJd_matrix(phi, grid: TorusGrid, J=None):
    """``d(J d phi)`` as an antisymmetric matrix field."""
    return dJd(phi, grid, J).to_matrix()


def dJd(phi, grid: TorusGrid, J=None) -> Form:
    """``d(J d phi)`` as a two-form field.

    The constant mean ``Jbar`` of J enters through the Hessian,
    ``d(Jbar dphi) = Jbar^T Hess - Hess Jbar``; the remainder is the composed
    exterior derivative of ``(J - Jbar) dphi``. Everything is assembled in
    Fourier space before a single inverse transform per component.
    """
    J = _asJ(J, grid)
    Jbar = J.mean
    dd = grid.d
    U = grid.fft(grid._check(phi))
    pairs = basis(dd, 2)
    hat = []
    for a, b in pairs:
        sym = 0.0
        for c in range(dd):
            if Jbar[c, a] != 0.0:
                sym = sym + Jbar[c, a] * grid.hess_symbol(c, b)
            if Jbar[c, b] != 0.0:
                sym = sym - Jbar[c, b] * grid.hess_symbol(a, c)
        hat.append(sym * U)
    if not J.constant:
        D = grid.d1_symbols
        grad = np.stack([grid.ifft(U * D[c]) for c in range(dd)], axis=-1)
        gamma = -np.einsum("...ba,...b->...a", J.J - Jbar, grad)
        G = grid.fft(gamma)
        for i, (a, b) in enumerate(pairs):
            hat[i] = hat[i] + D[a] * G[..., b] - D[b] * G[..., a]
    comps = grid.ifft(np.stack(hat, axis=-1))
    return Form(dd, 2, comps)


def _pull(B, J):
    """``B(J., J.)`` as a matrix: ``J^T B J``."""
    return np.swapaxes(J, -1, -2) @ B @ J


def project_types_matrix(B, J):
    JB = _pull(B, J)
    return 0.5 * (B + JB), 0.5 * (B - JB)


def project_types(beta: Form, J) -> dict:
    JJ = J.J if isinstance(J, ACSField) else np.asarray(J)
    p11, p2 = project_types_matrix(beta.to_matrix(), JJ)
    return {"p11": Form.from_matrix(p11), "p20_02": Form.from_matrix(p2)}


def nijenhuis(J, grid: TorusGrid = None):
    """Nijenhuis tensor ``N[..., c, a, b]`` of ``N(e_a, e_b)`` in component c."""
    if not isinstance(J, ACSField):
        J = ACSField(grid, J)
    grid = J.grid
    dd = grid.d
    if J.constant:
        return np.zeros(grid.shape + (dd, dd, dd))
    JF = J.J
    dJ = np.stack([grid.deriv(JF.reshape(grid.shape + (dd * dd,)), e).reshape(JF.shape)
                   for e in range(dd)], axis=-3)  # dJ[..., e, c, b] = d_e J^c_b
    t1 = np.einsum("...da,...dcb->...cab", JF, dJ)
    t3 = np.einsum("...cd,...adb->...cab", JF, dJ)
    return t1 - np.swapaxes(t1, -1, -2) - t3 + np.swapaxes(t3, -1, -2)


def torsion_part_matrix(phi, grid: TorusGrid, J=None, N=None):
    """Real ``(2,0)+(0,2)`` part of ``dJd phi`` from first derivatives only:
    ``P(X, Y) = -1/2 dphi(J N(X, Y))``."""
    J = _asJ(J, grid)
    if J.constant:
        return np.zeros(grid.shape + (grid.d,) * 2)
    if N is None:
        N = nijenhuis(J)
    v = np.einsum("...e,...ec->...c", grid.grad(phi), J.J)
    return -0.5 * np.einsum("...c,...cab->...ab", v, N)


def complex_projector(J):
    """``(I - iJ)/2`` onto the +i eigenspace of J."""
    d = J.shape[-1]
    return 0.5 * (np.eye(d) - 1j * J)


def tau_H(phi, grid: TorusGrid, J=None, omega=None, N=None) -> dict:
    """Torsion part ``tau`` (complex, one pure type) and Hermitian part ``H``.

    ``tau + H + conj(tau)`` reassembles ``omega + dJd phi``; ``tau`` is built
    from the Nijenhuis tensor, ``H`` from the J-invariant projection.
    """
    J = _asJ(J, grid)
    W = omega_std(grid.n) if omega is None else omega
    B = dJd_matrix(phi, grid, J)
    p11, _ = project_types_matrix(B, J.J)
    H = W + p11
    P = torsion_part_matrix(phi, grid, J, N)
    Pi = complex_projector(J.J)
    tau = np.swapaxes(Pi, -1, -2) @ P @ Pi
    return {"tau": Form.from_matrix(tau), "H": Form.from_matrix(np.broadcast_to(H, B.shape))}


def hermitian_margin(Hmat, J):
    """Pointwise smallest eigenvalue of ``H(., J.)`` relative to ``omega_std(., J.)``.

    ``H`` is J-invariant, so its real ``2n x 2n`` form is the realification of
    the Hermitian ``n x n`` matrix in a unitary frame; one complex eigensolve
    of size n replaces the real one of size 2n.
    """
    d = Hmat.shape[-1]
    G = omega_std(d // 2) @ J
    G = 0.5 * (G + np.swapaxes(G, -1, -2))
    h = hermitian_matrix(Hmat, J, G)
    return np.linalg.eigvalsh(h)[..., 0]


def unitary_frame(J, G):
    """Columns ``(v1, J v1, v2, J v2, ...)``, g-orthonormal; works on batches."""
    J = np.asarray(J, float)
    G = np.asarray(G, float)
    dd = J.shape[-1]
    shape = np.broadcast_shapes(J.shape[:-2], G.shape[:-2])
    E = np.zeros(shape + (dd, dd))

    def ip(u, v):
        return np.einsum("...a,...ab,...b->...", u, G, v)

    cols = []
    for j in range(dd // 2):
        v = np.zeros(shape + (dd,))
        v[..., 2 * j] = 1.0
        for c in cols:
            v = v - ip(c, v)[..., None] * c
        v = v / np.sqrt(ip(v, v))[..., None]
        w = np.einsum("...ab,...b->...a", J, v)
        cols += [v, w]
    for i, c in enumerate(cols):
        E[..., :, i] = c
    return E


def hermitian_matrix(B, J, G):
    """Hermitian ``n x n`` matrix of a J-invariant real 2-form ``B``.

    In the unitary frame, ``Q = B(., J.)`` and ``h_jk = Q[x_j, x_k] + i Q[x_j, y_k]``;
    the background form maps to the identity.
    """
    E = unitary_frame(J, G)
    Bp = np.swapaxes(E, -1, -2) @ B @ E
    n = B.shape[-1] // 2
    Q = Bp @ J_std(n)
    return Q[..., 0::2, 0::2] + 1j * Q[..., 0::2, 1::2]


def integrate_top(form: Form, grid: TorusGrid):
    return grid.integrate(form.top())


__all__ = [
    "ACSField", "synthetic_J", "d", "apply_J_to_form", "dJd", "dJd_matrix",
    "project_types", "project_types_matrix", "nijenhuis", "torsion_part_matrix",
    "tau_H", "hermitian_margin", "unitary_frame", "hermitian_matrix", "wedge", "integrate_top",
]
