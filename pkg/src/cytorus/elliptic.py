"""Krylov solver for ``L(phi) u = r`` on mean-zero grid functions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, ParameterOutOfRange, RhsNotMeanZero

PRECONDITIONERS = ("none", "fourier-laplacian")


@dataclass
class SolveOptions:
    tol_rel: float = 1e-10
    max_iter: int = None
    preconditioner: str = "fourier-laplacian"
    restart: int = 60
    mean_tol: float = 1e-9

    def __post_init__(self):
        if not self.tol_rel > 0:
            raise ParameterOutOfRange("tol_rel must be positive")
        if self.preconditioner not in PRECONDITIONERS:
            raise ParameterOutOfRange(f"unknown preconditioner {self.preconditioner!r}")
        if self.max_iter is not None and self.max_iter < 1:
            raise ParameterOutOfRange("max_iter must be positive")


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool


def _mean_free(v, grid):
    return v - grid.mean(v)


def gmres(apply, b, precond, tol, max_iter, restart, project):
    """Right-preconditioned restarted GMRES; returns (x, iterations, rel_residual).

    ``project`` maps onto the working subspace and is applied to every new
    Krylov vector.
    """
    shape = b.shape
    bflat = b.ravel()
    bnorm = np.linalg.norm(bflat)
    x = np.zeros_like(bflat)
    if bnorm == 0.0:
        return x.reshape(shape), 0, 0.0
    total = 0
    r = bflat.copy()
    rnorm = bnorm
    best = (x.copy(), rnorm)
    while total < max_iter:
        k_max = min(restart, max_iter - total)
        V = np.zeros((k_max + 1, bflat.size))
        Z = np.zeros((k_max, bflat.size))
        Hm = np.zeros((k_max + 1, k_max))
        cs = np.zeros(k_max)
        sn = np.zeros(k_max)
        e = np.zeros(k_max + 1)
        e[0] = rnorm
        V[0] = r / rnorm
        k_done = 0
        for k in range(k_max):
            z = project(precond(V[k].reshape(shape))).ravel()
            Z[k] = z
            w = project(apply(z.reshape(shape))).ravel()
            for _ in range(2):  # classical Gram-Schmidt, applied twice
                for i in range(k + 1):
                    hik = np.dot(V[i], w)
                    Hm[i, k] += hik
                    w -= hik * V[i]
            Hm[k + 1, k] = np.linalg.norm(w)
            if Hm[k + 1, k] > 0:
                V[k + 1] = w / Hm[k + 1, k]
            for i in range(k):
                t = cs[i] * Hm[i, k] + sn[i] * Hm[i + 1, k]
                Hm[i + 1, k] = -sn[i] * Hm[i, k] + cs[i] * Hm[i + 1, k]
                Hm[i, k] = t
            den = np.hypot(Hm[k, k], Hm[k + 1, k])
            cs[k], sn[k] = (1.0, 0.0) if den == 0 else (Hm[k, k] / den, Hm[k + 1, k] / den)
            Hm[k, k] = cs[k] * Hm[k, k] + sn[k] * Hm[k + 1, k]
            Hm[k + 1, k] = 0.0
            e[k + 1] = -sn[k] * e[k]
            e[k] = cs[k] * e[k]
            total += 1
            k_done = k + 1
            if abs(e[k + 1]) <= tol * bnorm:
                break
        y = np.linalg.solve(np.triu(Hm[:k_done, :k_done]), e[:k_done]) if k_done else []
        if k_done:
            x = x + y @ Z[:k_done]
        r = bflat - project(apply(x.reshape(shape))).ravel()
        rnorm = np.linalg.norm(r)
        if rnorm < best[1]:
            best = (x.copy(), rnorm)
        if rnorm <= tol * bnorm:
            return x.reshape(shape), total, rnorm / bnorm
        if k_done == 0:
            break
    return best[0].reshape(shape), total, best[1] / bnorm


def solve_linearized(Lop, rhs, opts: SolveOptions = None):
    """Solve ``Lop(u) = rhs`` with ``mean(u) = 0``.

    Returns ``(u, report)``. Raises ``RhsNotMeanZero`` when the right-hand
    side violates solvability and ``NoConvergence`` (carrying the best
    iterate) when the iteration budget is exhausted.
    """
    opts = opts or SolveOptions()
    grid = Lop.grid
    rhs = np.asarray(rhs, float)
    scale = max(np.abs(rhs).max(), 1e-300)
    mean = grid.mean(rhs)
    if abs(mean) > opts.mean_tol * max(scale, 1.0):
        raise RhsNotMeanZero(f"right-hand side has mean {mean:.3e}")
    b = _mean_free(rhs, grid)
    max_iter = opts.max_iter if opts.max_iter is not None else 10 * grid.npoints
    if opts.preconditioner == "fourier-laplacian":
        precond = grid.inverse_laplacian
    else:
        def precond(v):
            return v
    project = lambda v: _mean_free(v, grid)  # noqa: E731
    u, its, res = gmres(Lop.apply, b, precond, opts.tol_rel, max_iter, opts.restart, project)
    u = _mean_free(u, grid)
    report = SolveReport(iterations=its, residual=float(res), converged=bool(res <= opts.tol_rel))
    if not report.converged:
        raise NoConvergence(
            f"GMRES stopped at relative residual {res:.3e} after {its} iterations", u, report)
    return u, report
