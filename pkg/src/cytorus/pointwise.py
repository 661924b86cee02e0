"""Linear algebra at a single point of a 2n-dimensional real vector space.

Conventions
-----------
Real coordinates are ordered ``(x1, y1, x2, y2, ...)``. A two-form is stored
as the antisymmetric matrix ``W`` with ``w(X, Y) = X^T W Y`` and an
endomorphism ``J`` acts on column vectors. The metric attached to a pair
``(omega, J)`` is ``g(X, Y) = omega(X, J Y)``, i.e. ``G = W @ J``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    NotAlmostComplex,
    NotCompatible,
    NotPositiveDefinite,
    NotSPD,
    ParameterOutOfRange,
)

TOL_ALG = 1e-10


def omega_std(n: int) -> np.ndarray:
    """Matrix of ``sum dx_j ^ dy_j``."""
    W = np.zeros((2 * n, 2 * n))
    for j in range(n):
        W[2 * j, 2 * j + 1] = 1.0
        W[2 * j + 1, 2 * j] = -1.0
    return W


def J_std(n: int) -> np.ndarray:
    """Standard complex structure, ``d/dx_j -> d/dy_j``."""
    J = np.zeros((2 * n, 2 * n))
    for j in range(n):
        J[2 * j + 1, 2 * j] = 1.0
        J[2 * j, 2 * j + 1] = -1.0
    return J


@dataclass(frozen=True)
class CompatibleTriple:
    omega: np.ndarray
    J: np.ndarray
    g: np.ndarray

    @property
    def n(self) -> int:
        return self.omega.shape[0] // 2

    @classmethod
    def from_pair(cls, omega, J):
        ok, g = check_compatible(omega, J)
        if not ok:
            raise NotCompatible("omega(., J.) is not a compatible metric")
        return cls(np.asarray(omega, float), np.asarray(J, float), g)

    @classmethod
    def standard(cls, n: int):
        return cls(omega_std(n), J_std(n), np.eye(2 * n))


@dataclass(frozen=True)
class DiagonalizationResult:
    a: np.ndarray
    basis: np.ndarray


# ---------------------------------------------------------------- eigensolver


def jacobi_eigh(A, tol: float = 1e-15, max_sweeps: int = 60):
    """Cyclic Jacobi eigensolver for real symmetric or complex Hermitian ``A``.

    Returns ascending eigenvalues and a unitary matrix of eigenvectors
    (columns). Each rotation first removes the phase of the pivot and then
    applies a real Givens rotation.
    """
    A = np.array(A, dtype=complex if np.iscomplexobj(A) else float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"square matrix expected, got {A.shape}")
    A = 0.5 * (A + A.conj().T)
    d = A.shape[0]
    V = np.eye(d, dtype=A.dtype)
    scale = np.linalg.norm(A)
    if scale == 0.0:
        return np.zeros(d), V
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= tol * scale:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = A[p, q]
                r = abs(apq)
                if r <= 1e-300:
                    continue
                phase = apq / r
                app, aqq = A[p, p].real, A[q, q].real
                zeta = (aqq - app) / (2.0 * r)
                if abs(zeta) > 1e150:
                    t = 0.5 / zeta
                else:
                    t = (1.0 if zeta >= 0 else -1.0) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # columns p, q of the unitary update D @ R
                cp = np.array([c, -s * np.conj(phase)])
                cq = np.array([s, c * np.conj(phase)])
                colp = A[:, p] * cp[0] + A[:, q] * cp[1]
                colq = A[:, p] * cq[0] + A[:, q] * cq[1]
                A[:, p], A[:, q] = colp, colq
                rowp = np.conj(cp[0]) * A[p, :] + np.conj(cp[1]) * A[q, :]
                rowq = np.conj(cq[0]) * A[p, :] + np.conj(cq[1]) * A[q, :]
                A[p, :], A[q, :] = rowp, rowq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p] * cp[0] + V[:, q] * cp[1]
                vq = V[:, p] * cq[0] + V[:, q] * cq[1]
                V[:, p], V[:, q] = vp, vq
    w = np.diag(A).real.copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def cholesky(A):
    """Lower-triangular ``L`` with ``A = L L^H``; raises on non-PD input."""
    A = np.asarray(A)
    d = A.shape[0]
    L = np.zeros_like(A, dtype=complex if np.iscomplexobj(A) else float)
    for j in range(d):
        s = A[j, j] - np.sum(L[j, :j] * np.conj(L[j, :j]))
        s = np.real(s)
        if not s > 0.0:
            raise NotPositiveDefinite("matrix is not positive definite")
        L[j, j] = np.sqrt(s)
        for i in range(j + 1, d):
            L[i, j] = (A[i, j] - np.sum(L[i, :j] * np.conj(L[j, :j]))) / L[j, j]
    return L


# ------------------------------------------------------------- structure checks


def _square(M, name):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] % 2:
        raise DimensionMismatch(f"{name} must be 2n x 2n, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise DimensionMismatch(f"{name} has non-finite entries")
    return M


def _check_pair(omega, J, tol):
    W = _square(omega, "omega")
    J = _square(J, "J")
    if W.shape != J.shape:
        raise DimensionMismatch(f"omega {W.shape} vs J {J.shape}")
    d = W.shape[0]
    scale = max(1.0, np.abs(W).max())
    if np.abs(W + W.T).max() > tol * scale:
        raise DimensionMismatch("omega is not antisymmetric")
    if np.abs(J @ J + np.eye(d)).max() > tol * max(1.0, np.abs(J).max() ** 2):
        raise NotAlmostComplex("J^2 != -I")
    return W, J


def _is_pd(S, tol=0.0):
    w = np.linalg.eigvalsh(0.5 * (S + S.T))
    return w[0] > tol * max(1.0, abs(w[-1])), w


def check_compatible(omega, J, tol: float = TOL_ALG):
    """Return ``(True, g)`` if ``omega(., J.)`` is a metric and J is symplectic."""
    W, J = _check_pair(omega, J, tol)
    G = W @ J
    scale = max(1.0, np.abs(G).max())
    if np.abs(G - G.T).max() > tol * scale:
        return False, None
    if np.abs(J.T @ W @ J - W).max() > tol * scale:
        return False, None
    ok, _ = _is_pd(G)
    if not ok:
        return False, None
    return True, 0.5 * (G + G.T)


def check_taming(omega, J, tol: float = TOL_ALG) -> bool:
    W, J = _check_pair(omega, J, tol)
    ok, _ = _is_pd(W @ J)
    return bool(ok)


def taming_margin(omega, J) -> float:
    """Smallest eigenvalue of the symmetric part of ``omega(., J.)``."""
    W = np.asarray(omega, float)
    G = W @ np.asarray(J, float)
    w, _ = jacobi_eigh(0.5 * (G + G.T))
    return float(w[0])


# --------------------------------------------------------- polar deformation


def polar_factor(J0, J, omega, tol: float = TOL_ALG):
    for name, JJ in (("J0", J0), ("J", J)):
        ok, _ = check_compatible(omega, JJ, tol)
        if not ok:
            raise NotCompatible(f"{name} is not compatible with omega")
    return -np.asarray(J0, float) @ np.asarray(J, float)


def matrix_log_spd(S):
    S = np.asarray(S, float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionMismatch(f"square matrix expected, got {S.shape}")
    scale = max(1.0, np.abs(S).max())
    if np.abs(S - S.T).max() > TOL_ALG * scale:
        raise NotSPD("matrix is not symmetric")
    w, V = jacobi_eigh(S)
    if w[0] <= 0.0:
        raise NotSPD(f"smallest eigenvalue {w[0]:.3e} is not positive")
    return (V * np.log(w)) @ V.T


def matrix_exp(H, t: float = 1.0):
    """``exp(t H)`` for symmetric ``H``."""
    H = np.asarray(H, float)
    w, V = jacobi_eigh(H)
    return (V * np.exp(t * w)) @ V.T


def spd_power(S, t: float, G=None):
    """``S**t`` for ``S`` self-adjoint and positive with respect to metric ``G``.

    A single eigendecomposition is used so that ``t = 1`` reproduces ``S`` to
    rounding error.
    """
    S = np.asarray(S, float)
    if G is None:
        Ls = np.eye(S.shape[0])
    else:
        Ls = cholesky(np.asarray(G, float)).T
    St = Ls @ S @ np.linalg.inv(Ls)
    St = 0.5 * (St + St.T)
    w, V = jacobi_eigh(St)
    if w[0] <= 0.0:
        raise NotSPD(f"smallest eigenvalue {w[0]:.3e} is not positive")
    P = (V * w**t) @ V.T
    return np.linalg.solve(Ls, P @ Ls)


def deform_triple(triple0: CompatibleTriple, J_target, t: float) -> CompatibleTriple:
    """Move ``triple0`` toward ``J_target`` along ``g(t) = g(0) S^t``."""
    if not (0.0 <= t <= 1.0) or not np.isfinite(t):
        raise ParameterOutOfRange(f"t must lie in [0, 1], got {t}")
    S = polar_factor(triple0.J, J_target, triple0.omega)
    St = spd_power(S, t, triple0.g)
    Jt = triple0.J @ St
    Gt = triple0.g @ St
    return CompatibleTriple(triple0.omega, Jt, 0.5 * (Gt + Gt.T))


def deformation_path(triple0: CompatibleTriple, J_target, ts):
    """``deform_triple`` at several ``t`` sharing one factorization of S."""
    ts = [float(t) for t in ts]
    if any(not (0.0 <= t <= 1.0) for t in ts):
        raise ParameterOutOfRange("t must lie in [0, 1]")
    S = polar_factor(triple0.J, J_target, triple0.omega)
    Ls = cholesky(triple0.g).T
    St = Ls @ S @ np.linalg.inv(Ls)
    w, V = jacobi_eigh(0.5 * (St + St.T))
    if w[0] <= 0.0:
        raise NotSPD(f"smallest eigenvalue {w[0]:.3e} is not positive")
    out = []
    for t in ts:
        P = np.linalg.solve(Ls, ((V * w**t) @ V.T) @ Ls)
        Gt = triple0.g @ P
        out.append(CompatibleTriple(triple0.omega, triple0.J @ P, 0.5 * (Gt + Gt.T)))
    return out


def random_symplectic(n: int, rng, scale: float = 0.5):
    """Cayley transform of a random Hamiltonian matrix; preserves ``omega_std``.

    Entries are scaled by ``1/sqrt(2n)`` so the distortion is comparable
    across dimensions.
    """
    d = 2 * n
    A = rng.standard_normal((d, d)) * (scale / np.sqrt(d))
    S = 0.5 * (A + A.T)
    X = J_std(n) @ S
    I = np.eye(d)
    return (I + 0.5 * X) @ np.linalg.inv(I - 0.5 * X)


def random_compatible_J(n: int, rng, scale: float = 0.5):
    P = random_symplectic(n, rng, scale)
    return np.linalg.solve(P, J_std(n) @ P)


# -------------------------------------------------- Hermitian diagonalization


def _hermitian(h, name):
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got {h.shape}")
    scale = max(1.0, np.abs(h).max())
    if np.abs(h - h.conj().T).max() > TOL_ALG * scale:
        raise DimensionMismatch(f"{name} is not Hermitian")
    return 0.5 * (h + h.conj().T)


def simultaneous_diagonalize(h0, ha) -> DiagonalizationResult:
    """Basis ``P`` with ``P^H h0 P = I`` and ``P^H ha P = diag(a)``."""
    h0 = _hermitian(h0, "h0")
    ha = _hermitian(ha, "ha")
    if h0.shape != ha.shape:
        raise DimensionMismatch(f"h0 {h0.shape} vs ha {ha.shape}")
    L = cholesky(h0)
    Linv = np.linalg.inv(L)
    C = Linv @ ha @ Linv.conj().T
    a, V = jacobi_eigh(C)
    if a[0] <= 0.0:
        raise NotPositiveDefinite("ha is not positive definite")
    return DiagonalizationResult(a=a, basis=Linv.conj().T @ V)


def pointwise_norm_identities(diag: DiagonalizationResult) -> dict:
    a = np.asarray(diag.a, float)
    return {
        "da_norm_sq": float(2.0 * np.sum((a - 1.0) ** 2)),
        "h_norm_sq": float(2.0 * np.sum(a**2)),
        "hinv_norm_sq": float(2.0 * np.sum(a**-2.0)),
    }


def hermitian_to_real(h):
    """Real symmetric 2n x 2n form ``2 Re(h(v, w))`` in ``(x, y)`` coordinates.

    ``h = sum h_jk dz_j (x) dzbar_k``; the resulting quadratic form satisfies
    ``Q(v) = 2 h(v, v)`` for real ``v``.
    """
    h = np.asarray(h, complex)
    n = h.shape[0]
    Q = np.zeros((2 * n, 2 * n))
    A, B = h.real, h.imag
    Q[0::2, 0::2] = 2 * A
    Q[1::2, 1::2] = 2 * A
    Q[0::2, 1::2] = 2 * B
    Q[1::2, 0::2] = -2 * B
    return 0.5 * (Q + Q.T)


def quasi_isometry(g_a, g_b) -> float:
    """Smallest ``C >= 1`` with ``g_a / C <= g_b <= C g_a``."""
    L = cholesky(_sym_pd(g_a, "g_a"))
    _sym_pd(g_b, "g_b")
    Li = np.linalg.inv(L)
    M = Li @ np.asarray(g_b, float) @ Li.T
    w = np.linalg.eigvalsh(0.5 * (M + M.T))
    return float(max(1.0, w[-1], 1.0 / w[0]))


def _sym_pd(G, name):
    G = np.asarray(G, float)
    G = 0.5 * (G + G.T)
    ok, _ = _is_pd(G)
    if not ok:
        raise NotPositiveDefinite(f"{name} is not positive definite")
    return G
