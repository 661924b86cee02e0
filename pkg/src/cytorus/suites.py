"""Batch verification suites shared by the command line and the test harness.

Each suite returns ``(rows, summary)``: ``rows`` is a list of flat dicts
suitable for CSV output and ``summary`` maps check names to
``{"value": ..., "limit": ..., "pass": bool}``.
"""

from __future__ import annotations

import numpy as np

from .atlas import (
    build_partition,
    form_norm,
    local_potentials,
    measurable_stokes_check,
    quasi_isometry_constant,
)
from .estimates import pointwise_identity_scan, wedge_positivity
from .exterior import Form
from .fields import dJd_matrix
from .grid import TorusGrid
from .operator import MAProblem, taming_margin
from .pointwise import (
    CompatibleTriple,
    check_compatible,
    deform_triple,
    deformation_path,
    jacobi_eigh,
    omega_std,
    pointwise_norm_identities,
    polar_factor,
    quasi_isometry,
    random_compatible_J,
    simultaneous_diagonalize,
)

T_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)


def check(value, limit, ok=None):
    value = float(value)
    return {"value": value, "limit": float(limit),
            "pass": bool(value <= limit) if ok is None else bool(ok)}


# ------------------------------------------------------------------- deformation


def deformation_sample(n, rng, scale=0.5):
    W = omega_std(n)
    J0 = random_compatible_J(n, rng, scale)
    J1 = random_compatible_J(n, rng, scale)
    tri0 = CompatibleTriple.from_pair(W, J0)
    S = polar_factor(J0, J1, W)
    gS = tri0.g @ S
    sc = max(1.0, float(np.abs(gS).max()))
    w, _ = jacobi_eigh(0.5 * (gS + gS.T))
    row = {
        "n": n,
        "S_sym": float(np.abs(gS - gS.T).max() / sc),
        "S_pd_min": float(w[0]),
        "S_symplectic": float(np.abs(S.T @ W @ S - W).max() / max(1.0, np.abs(S).max() ** 2)),
        "S_conj": float(np.abs(J0 @ S @ np.linalg.inv(J0) @ S - np.eye(2 * n)).max()),
    }
    G1 = W @ J1
    comp, Cs = [], []
    path = deformation_path(tri0, J1, T_GRID)
    g_end = path[-1].g
    for tri in path:
        ok, _ = check_compatible(W, tri.J)
        Gt = W @ tri.J
        comp.append(0.0 if ok else float(np.abs(Gt - Gt.T).max() + 1.0))
        Cs.append(quasi_isometry(tri.g, g_end))
    row["compat_defect"] = max(comp)
    row["g1_error"] = float(np.abs(g_end - G1).max() / max(1.0, np.abs(G1).max()))
    for t, C in zip(T_GRID, Cs):
        row[f"C_t{t:g}"] = C
    return row


def deformation_suite(samples=1000, seed=1, max_n=4, scale=0.5):
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(samples):
        n = int(rng.integers(1, max_n + 1))
        rows.append(deformation_sample(n, rng, scale))

    def worst(key):
        return max(r[key] for r in rows)

    summary = {
        "S_symmetric": check(worst("S_sym"), 1e-10),
        "S_positive": check(min(r["S_pd_min"] for r in rows), 0.0,
                            ok=min(r["S_pd_min"] for r in rows) > 0),
        "S_symplectic": check(worst("S_symplectic"), 1e-10),
        "S_conjugation": check(worst("S_conj"), 1e-10),
        "compatibility": check(worst("compat_defect"), 0.0),
        "g1_recovery": check(worst("g1_error"), 1e-12),
        "C_finite": check(max(max(r[f"C_t{t:g}"] for t in T_GRID) for r in rows), np.inf,
                          ok=all(np.isfinite(r[f"C_t{t:g}"]) for r in rows for t in T_GRID)),
        "C_at_1": check(max(abs(r["C_t1"] - 1.0) for r in rows), 1e-12),
    }
    return rows, summary


# ------------------------------------------------------------------------ atlas


def _trig_form(grid, shift):
    """A fixed smooth (d-1)-form evaluated in coordinates shifted by ``shift``."""
    x = [xx - s for xx, s in zip(grid.coords(), shift)]
    d = grid.d
    tp = 2 * np.pi
    comps = []
    for i in range(d):
        a = x[i % d] + shift[i % d]
        b = x[(i + 1) % d] + shift[(i + 1) % d]
        comps.append(np.sin(tp * (a + 2 * b) + i) + 0.5 * np.cos(tp * b))
    return Form(d, d - 1, np.stack(comps, axis=-1))


def atlas_suite(m=32, Ns=(2, 4), overlap=0.1, seed=3):
    rows = []
    rng = np.random.default_rng(seed)
    grid = TorusGrid(1, m)
    for N in Ns:
        part = build_partition(grid, N, overlap)
        chk = part.check()
        psi = grid.random_bandlimited(rng, 4, 1.0)
        pot = local_potentials(dJd_matrix(psi, grid), part)
        shape_err = max(float(np.nanstd(p - psi)) for p in pot.potentials)
        alpha = _trig_form(grid, (0.0,) * grid.d)
        norm = form_norm(alpha)
        metrics = []
        tri0 = CompatibleTriple.standard(1)
        Jk = [random_compatible_J(1, rng) for _ in range(N)]
        for k in range(N):
            metrics.append(deform_triple(tri0, Jk[k], 0.5).g)
        stokes = measurable_stokes_check(alpha, part, metrics) / norm
        pieces = [_trig_form(grid, c.origin) for c in part.charts]
        stokes_pieces = measurable_stokes_check(pieces, part, metrics) / norm
        x = grid.coords()
        bad = [Form(2, 1, p.c + 0.3 * k * np.stack([0 * x[0], np.sin(2 * np.pi * x[0] + k)], -1))
               for k, p in enumerate(pieces)]
        stokes_bad = measurable_stokes_check(bad, part, metrics) / norm
        Cs = {}
        g_end = [deform_triple(tri0, J, 1.0).g for J in Jk]
        for t in (0.0, 0.5, 1.0):
            g_t = [deform_triple(tri0, J, t).g for J in Jk]
            Cs[t] = quasi_isometry_constant(g_t, g_end, part)
        rows.append({
            "N": N, "covered": chk["covered"], "disjoint": chk["disjoint"],
            "exhaustive": chk["exhaustive"], "skeleton": chk["skeleton"],
            "gluing_defect": pot.gluing_defect, "potential_shape_error": shape_err,
            "stokes": stokes, "stokes_pieces": stokes_pieces, "stokes_mismatch": stokes_bad,
            "C_t0": Cs[0.0], "C_t0.5": Cs[0.5], "C_t1": Cs[1.0],
            "global_mean": abs(float(grid.mean(pot.global_potential))),
        })
    summary = {
        "partition_exact": check(0, 0, ok=all(r["covered"] and r["disjoint"] and r["exhaustive"]
                                              for r in rows)),
        "gluing": check(max(r["gluing_defect"] for r in rows), 1e-8),
        "stokes_smooth": check(max(r["stokes"] for r in rows), 1e-10),
        "stokes_pieces": check(max(r["stokes_pieces"] for r in rows), 1e-10),
        "mismatch_detected": check(min(r["stokes_mismatch"] for r in rows), 1e-6,
                                   ok=min(r["stokes_mismatch"] for r in rows) > 1e-6),
        "C_at_1": check(max(abs(r["C_t1"] - 1.0) for r in rows), 1e-12),
    }
    return rows, summary


# ------------------------------------------------------------------- identities


def random_taming_state(prob: MAProblem, rng, kmax=2, margin_floor=0.05):
    """Random band-limited potential with positive taming margin."""
    grid = prob.grid
    shape = grid.random_bandlimited(rng, kmax, 1.0)
    amp = 0.02
    while True:
        phi = rng.uniform(0.2, 1.0) * amp * shape
        if taming_margin(phi, prob) > margin_floor:
            return phi
        amp *= 0.5


def hermitian_pair_scan(samples, rng, max_n=4):
    """Simultaneous diagonalization identities on random Hermitian pairs."""
    worst = {"basis": 0.0, "trace": 0.0, "det": 0.0, "norm": 0.0}
    for _ in range(samples):
        n = int(rng.integers(1, max_n + 1))
        X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        Y = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        h0 = X @ X.conj().T + n * np.eye(n)
        ha = Y @ Y.conj().T + 0.5 * np.eye(n)
        res = simultaneous_diagonalize(h0, ha)
        P, a = res.basis, res.a
        e1 = np.abs(P.conj().T @ h0 @ P - np.eye(n)).max()
        e2 = np.abs(P.conj().T @ ha @ P - np.diag(a)).max() / max(1.0, a.max())
        worst["basis"] = max(worst["basis"], e1, e2)
        tr = np.trace(np.linalg.solve(h0, ha)).real
        worst["trace"] = max(worst["trace"], abs(tr - a.sum()) / max(1.0, abs(tr)))
        det = (np.linalg.det(ha) / np.linalg.det(h0)).real
        worst["det"] = max(worst["det"], abs(det - np.prod(a)) / abs(det))
        # |ha - h0|^2 measured with h0, in the doubled real convention
        K = np.linalg.solve(h0, ha - h0)
        norm = 2.0 * np.trace(K @ K).real
        ref = pointwise_norm_identities(res)["da_norm_sq"]
        worst["norm"] = max(worst["norm"], abs(norm - ref) / max(1.0, ref))
    return worst


def identities_suite(prob: MAProblem, phi, states=50, seed=5, pairs=200, solution_tol=1e-8):
    rng = np.random.default_rng(seed)
    rows = []
    scan = pointwise_identity_scan(phi, prob, solution_tol)
    rows.append({"kind": "state", **scan})
    zero = MAProblem(prob.grid, prob.J, np.zeros(prob.grid.shape), A=1.0)
    gmin = np.inf
    for i in range(states):
        st = random_taming_state(zero, rng)
        g = wedge_positivity(st, zero)
        gmin = min(gmin, min(g))
        rows.append({"kind": "wedge", "index": i, **{f"G{j}_min": v for j, v in enumerate(g)}})
    pair = hermitian_pair_scan(pairs, rng)
    rows.append({"kind": "pairs", **pair})
    summary = {
        "product": check(scan["product"], 1e-9),
        "da_norm": check(scan["da_norm"], 1e-9),
        "wedge_G_min": check(-gmin, 1e-10),
        "pair_identities": check(max(pair.values()), 1e-10),
    }
    if "laplacian_trace" in scan:
        summary["laplacian_trace"] = check(scan["laplacian_trace"], 1e-9)
    return rows, summary


__all__ = ["deformation_suite", "atlas_suite", "identities_suite", "hermitian_pair_scan",
           "random_taming_state", "deformation_sample"]
