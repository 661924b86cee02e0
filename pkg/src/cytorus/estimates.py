"""Observers for the a priori estimate quantities of solver states.

Normalization used throughout: for a constant compatible J with unitary frame
``Z_1..Z_n`` (``Z = (e - i J e)/2``), the Hermitian matrix of
``omega + dJd phi`` is ``h(a) = I + Hess_C psi`` with ``psi = 4 phi`` and
``Hess_C u = Hess u(Z_alpha, conj Z_beta)``. The geometric Laplacian is
``Lap^L phi = n - tr h(a) = -Lap_g phi``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from math import factorial

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import NotASolution, NotPositive, ParameterOutOfRange
from .exterior import Form, power, wedge
from .fields import apply_J_to_form, d, hermitian_matrix, project_types_matrix, unitary_frame
from .operator import MAProblem, F_component, F_op, tau_H_matrices

P_LADDER = (2, 4, 8, 16, np.inf)


# ----------------------------------------------------------- frames / matrices


def _require_constant_J(prob):
    if not prob.J.constant:
        raise ParameterOutOfRange("this monitor needs a constant (integrable) J")


def complex_frame_vectors(prob):
    _require_constant_J(prob)
    G = prob.omega @ prob.J.J
    E = unitary_frame(prob.J.J, 0.5 * (G + G.T))
    return 0.5 * (E[:, 0::2] - 1j * E[:, 1::2])  # columns Z_alpha


def _dir_symbol(grid, v):
    return sum(v[a] * grid.d1_symbols[a] for a in range(grid.d) if v[a] != 0)


def _hess_dir_symbol(grid, v, w):
    """Symbol of ``Hess(v, w)`` using the scheme's second-derivative rules."""
    s = 0.0
    for a in range(grid.d):
        for b in range(grid.d):
            c = v[a] * w[b]
            if c != 0:
                s = s + c * grid.hess_symbol(a, b)
    return s


def third_derivative_tensor(u, grid, Z):
    """``T(Z_al, conj Z_be, Z_ga)`` for all index triples, complex field."""
    U = grid.fft(u)
    n = Z.shape[1]
    out = np.empty(grid.shape + (n, n, n), dtype=complex)
    for al in range(n):
        for be in range(n):
            for ga in range(n):
                out[..., al, be, ga] = _mixed(grid, U, [Z[:, al], np.conj(Z[:, be]), Z[:, ga]])
    return out


def _mixed(grid, U, vecs):
    """Derivative along complex directions applied to a real field.

    Each complex direction ``v = p + i q`` is expanded into real directional
    derivatives so every inverse transform acts on a real multiplier.
    """
    terms = [(1.0 + 0j, [])]
    for v in vecs:
        new = []
        for c, lst in terms:
            if np.any(v.real != 0):
                new.append((c, lst + [v.real]))
            if np.any(v.imag != 0):
                new.append((c * 1j, lst + [v.imag]))
        terms = new
    acc = None
    for c, lst in terms:
        sym = 1.0
        for w in lst:
            sym = sym * _dir_symbol(grid, w)
        val = c * grid.ifft(sym * U)
        acc = val if acc is None else acc + val
    return acc


def hess_C_real(u, grid, Z):
    """``Hess u(Z_al, conj Z_be)`` with real multipliers only."""
    U = grid.fft(u)
    n = Z.shape[1]
    out = np.empty(grid.shape + (n, n), dtype=complex)
    for al in range(n):
        for be in range(n):
            p, q = Z[:, al], np.conj(Z[:, be])
            val = 0j
            for cp, vp in ((1.0, p.real), (1j, p.imag)):
                if not np.any(vp):
                    continue
                for cq, vq in ((1.0, q.real), (1j, q.imag)):
                    if not np.any(vq):
                        continue
                    val = val + cp * cq * grid.ifft(_hess_dir_symbol(grid, vp, vq) * U)
            out[..., al, be] = val
    return out


def ha_field(phi, prob: MAProblem):
    """Hermitian matrix field of the J-invariant part of ``omega(phi)``."""
    _, H = tau_H_matrices(phi, prob)
    G = prob.omega @ prob.J.J
    G = 0.5 * (G + np.swapaxes(G, -1, -2))
    H = np.broadcast_to(H, prob.grid.shape + H.shape[-2:])
    return hermitian_matrix(H, prob.J.J, G)


def a_field(phi, prob: MAProblem):
    """Generalized eigenvalues ``a_1 <= ... <= a_n`` of ``(h0, h(a))`` per point."""
    return np.linalg.eigvalsh(ha_field(phi, prob))


# ------------------------------------------------------------------ residuals


def solution_residual(phi, prob: MAProblem):
    return float(np.abs(F_op(phi, prob) - prob.A * np.exp(prob.f)).max())


def _require_solution(phi, prob, tol):
    r = solution_residual(phi, prob)
    if r > tol:
        raise NotASolution(f"state residual {r:.3e} exceeds {tol:.1e}")
    return r


# ------------------------------------------------------------------ zero order


def lp_norm(phi, grid, p):
    a = np.abs(phi)
    if np.isinf(p):
        return float(a.max())
    return float(grid.integrate(a**p) ** (1.0 / p))


def zero_order_monitor(phi, prob: MAProblem, c4_bounds=(0.5, 1e3)) -> dict:
    """Norm ladder and the fitted ``(Q2, C4)`` envelope."""
    grid, n = prob.grid, prob.n
    norms = {p: lp_norm(phi, grid, p) for p in P_LADDER}
    finite = [p for p in P_LADDER if np.isfinite(p)]

    def envelope(logc):
        c = np.exp(logc)
        vals = [norms[p] * (c * p) ** (n / p) for p in finite] + [norms[np.inf]]
        return max(vals)

    if norms[np.inf] == 0.0:
        q2, c4 = 0.0, c4_bounds[0]
    else:
        res = minimize_scalar(envelope, bounds=tuple(np.log(c4_bounds)), method="bounded",
                              options={"xatol": 1e-10})
        c4 = float(np.exp(res.x))
        q2 = float(envelope(res.x))
    return {
        "norms": {("inf" if np.isinf(p) else int(p)): v for p, v in norms.items()},
        "Q2": q2,
        "C4": c4,
        "sup_bounded": bool(norms[np.inf] <= q2 * (1 + 1e-6)),
    }


def moser_inequality_check(phi, prob: MAProblem, p: float, solution_tol: float = 1e-8) -> dict:
    if p < 2:
        raise ParameterOutOfRange("p must be at least 2")
    _require_solution(phi, prob, solution_tol)
    grid, n = prob.grid, prob.n
    G = prob.omega @ prob.J.J
    Ginv = np.linalg.inv(0.5 * (G + np.swapaxes(G, -1, -2)))
    gr = grid.grad(phi)
    grad2 = np.einsum("...a,...ab,...b->...", gr, Ginv, gr)
    a = np.abs(phi)
    lhs = (p * p / 4.0) * grid.integrate(a ** (p - 2) * grad2)
    rhs = (n * p * p / (4.0 * (p - 1))) * grid.integrate(
        (1.0 - prob.A * np.exp(prob.f)) * phi * a ** (p - 2))
    ratio = float(lhs / rhs) if rhs != 0 else (0.0 if lhs == 0 else np.inf)
    return {"lhs": float(lhs), "rhs": float(rhs), "ratio": ratio}


# ---------------------------------------------------------------- second order


def laplacian_L(phi, prob: MAProblem):
    """``Lap^L phi = -tr(G^{-1} Hess phi)`` for constant J."""
    _require_constant_J(prob)
    G = prob.omega @ prob.J.J
    Ginv = np.linalg.inv(0.5 * (G + G.T))
    Hs = prob.grid.hessian(phi)
    return -np.einsum("ab,...ab->...", Ginv, Hs)


def second_order_monitor(phi, prob: MAProblem) -> dict:
    n = prob.n
    a = a_field(phi, prob)
    bound = n - n * (prob.A * np.exp(prob.f)) ** (1.0 / n)
    out = {
        "trace_max": float(np.sum(a, axis=-1).max()),
        "bound_rhs_min": float(bound.min()),
        "margin": float(a[..., 0].min()),
        "ha_norm_max": float(np.sqrt(2 * np.sum(a**2, axis=-1)).max()),
        "ha_inv_norm_max": float(np.sqrt(2 * np.sum(a**-2.0, axis=-1)).max()),
    }
    if prob.J.constant:
        lapL = laplacian_L(phi, prob)
        out["laplacian_max"] = float(np.max(-lapL))
        out["laplacian_bound_defect"] = float(np.max(lapL - bound))
    else:
        out["laplacian_max"] = float(np.max(np.sum(a, axis=-1) - n))
        out["laplacian_bound_defect"] = float(np.max(n - np.sum(a, axis=-1) - bound))
    return out


def laplacian_bound_defect(phi, prob: MAProblem) -> float:
    return second_order_monitor(phi, prob)["laplacian_bound_defect"]


# ----------------------------------------------------------------- third order


def _D_tensor(phi, prob):
    Z = complex_frame_vectors(prob)
    return 4.0 * third_derivative_tensor(phi, prob.grid, Z), Z


def third_order_S(phi, prob: MAProblem):
    """Pointwise ``S`` with ``S^2 = K K K D conj(D)``, ``K = h(a)^{-1}``."""
    _require_constant_J(prob)
    ha = ha_field(phi, prob)
    a = np.linalg.eigvalsh(ha)
    if a[..., 0].min() <= 0:
        raise NotPositive("h(a) is not positive definite")
    K = np.linalg.inv(ha)
    D, _ = _D_tensor(phi, prob)
    S2 = np.einsum("...al,...mb,...gn,...abg,...lmn->...", K, K, K, D, np.conj(D))
    return np.sqrt(np.maximum(S2.real, 0.0))


def laplacian_identity_check(phi, prob: MAProblem, solution_tol: float = 1e-8) -> dict:
    """Both sides of the differentiated equation ``Lap log det h(a) = Lap f``."""
    _require_constant_J(prob)
    _require_solution(phi, prob, solution_tol)
    grid = prob.grid
    ha = ha_field(phi, prob)
    if np.linalg.eigvalsh(ha)[..., 0].min() <= 0:
        raise NotPositive("h(a) is not positive definite")
    K = np.linalg.inv(ha)
    Z = complex_frame_vectors(prob)
    lap = -laplacian_L(phi, prob)
    lhs = np.einsum("...ba,...ab->...", K, hess_C_real(lap, grid, Z)).real
    D, _ = _D_tensor(phi, prob)
    # (d_k ha)_{ab} = D[a, b, k];  (d_kbar ha)_{ab} = conj(D[b, a, k])
    dk = np.moveaxis(D, -1, 0)
    dkb = np.conj(np.swapaxes(dk, -1, -2))
    quad = sum(np.einsum("...ab,...bc,...cd,...da->...", K, dk[k], K, dkb[k]) for k in range(prob.n))
    lapf = -laplacian_L(prob.f, prob)
    rhs = 0.25 * lapf + quad.real
    return {"lhs_field": lhs, "rhs_field": rhs, "defect": float(np.abs(lhs - rhs).max())}


# ----------------------------------------------------------- wedge / pointwise


def wedge_G(phi, prob: MAProblem):
    """``G_j`` with ``dphi ^ J dphi ^ omega^{n-j-1} ^ omega(phi)^j = G_j omega^n``."""
    grid, n = prob.grid, prob.n
    dphi = d(phi, grid)
    Jdphi = apply_J_to_form(dphi, prob.J)
    q = wedge(dphi, Jdphi)
    W = Form.from_matrix(prob.omega)
    Wphi = Form.from_matrix(prob.omega_phi(phi))
    base = power(W, n).top()
    out = []
    for j in range(n):
        top = wedge(wedge(q, power(W, n - j - 1)), power(Wphi, j)).top()
        out.append(top / base)
    return out


def wedge_positivity(phi, prob: MAProblem):
    return [float(Gj.min()) for Gj in wedge_G(phi, prob)]


def pointwise_identity_scan(phi, prob: MAProblem, solution_tol: float = 1e-8) -> dict:
    """Worst relative defects of the pointwise algebraic identities."""
    _require_solution(phi, prob, solution_tol)
    n = prob.n
    ha = ha_field(phi, prob)
    a = np.linalg.eigvalsh(ha)
    target = prob.A * np.exp(prob.f)
    if prob.n >= 2 and not prob.J.constant:
        target = target - sum(F_component(phi, j, prob) for j in range(1, n // 2 + 1))
    prod_def = np.abs(np.prod(a, axis=-1) - target) / np.abs(target)
    # |omega(phi)_{1,1} - omega|^2 in the full tensor convention
    _, H = tau_H_matrices(phi, prob)
    Bm = np.broadcast_to(H, prob.grid.shape + H.shape[-2:]) - prob.omega
    G = prob.omega @ prob.J.J
    Ginv = np.linalg.inv(0.5 * (G + np.swapaxes(G, -1, -2)))
    norm2 = np.einsum("...ab,...bc,...dc,...da->...", Ginv, Bm, Bm, Ginv)
    da_ref = 2 * np.sum((a - 1) ** 2, axis=-1)
    norm_def = np.abs(norm2 - da_ref) / np.maximum(1.0, da_ref)
    out = {"product": float(prod_def.max()), "da_norm": float(norm_def.max())}
    # trace identity: Lap^L phi = n - sum a_j
    if prob.J.constant:
        lapL = laplacian_L(phi, prob)
        tr_def = np.abs(lapL - (n - np.sum(a, axis=-1)))
        out["laplacian_trace"] = float(tr_def.max() / max(1.0, np.abs(lapL).max()))
    return out


# ---------------------------------------------------------------- aggregation


@dataclass
class EstimateReport:
    zero_order: dict = field(default_factory=dict)
    second_order: dict = field(default_factory=dict)
    third_order: dict = field(default_factory=dict)
    pointwise: dict = field(default_factory=dict)
    wedge: dict = field(default_factory=dict)

    def as_dict(self):
        return asdict(self)

    def row(self) -> dict:
        """Flat column mapping for one CSV row."""
        out = {}
        z = self.zero_order
        for p, v in z.get("norms", {}).items():
            out[f"L{p}"] = v
        for key in ("Q2", "C4", "sup_bounded"):
            if key in z:
                out[key] = z[key]
        for p, v in (z.get("moser") or {}).items():
            out[f"moser{p}"] = v
        for sec in (self.second_order, self.third_order, self.pointwise):
            out.update(sec)
        for j, v in enumerate(self.wedge.get("G_min", [])):
            out[f"G{j}_min"] = v
        return out


def estimate_report(phi, prob: MAProblem, solution_tol: float = 1e-8, moser_p=(2, 4, 8)):
    rep = EstimateReport()
    z = zero_order_monitor(phi, prob)
    try:
        z["moser"] = {int(p): moser_inequality_check(phi, prob, p, solution_tol)["ratio"]
                      for p in moser_p}
    except NotASolution:
        z["moser"] = None
    rep.zero_order = z
    rep.second_order = second_order_monitor(phi, prob)
    if prob.J.constant:
        rep.third_order = {"S_max": float(third_order_S(phi, prob).max())}
    else:
        rep.third_order = {"S_max": float("nan")}
    try:
        rep.pointwise = pointwise_identity_scan(phi, prob, solution_tol)
    except NotASolution:
        rep.pointwise = {}
    rep.wedge = {"G_min": wedge_positivity(phi, prob)}
    return rep


def gradient_wedge_factor(n: int) -> float:
    """Ratio in ``dphi ^ J dphi ^ omega^{n-1} = c |grad phi|^2 omega^n``."""
    return 1.0 / n


def unit_volume_factor(n: int) -> float:
    return 1.0 / factorial(n)


__all__ = [
    "unitary_frame", "hermitian_matrix", "ha_field", "a_field", "zero_order_monitor",
    "moser_inequality_check", "second_order_monitor", "laplacian_identity_check",
    "third_order_S", "wedge_G", "wedge_positivity", "pointwise_identity_scan",
    "EstimateReport", "estimate_report", "project_types_matrix",
]
