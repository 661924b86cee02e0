"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line; the lines are repeated in the
terminal summary under "acceptance criteria".
"""

import filecmp
import time

import numpy as np
import pytest

from cytorus.cli import main
from cytorus.continuity import continuity_solve, problem_at
from cytorus.estimates import laplacian_identity_check, pointwise_identity_scan, laplacian_bound_defect
from cytorus.fields import ACSField, synthetic_J
from cytorus.grid import TorusGrid
from cytorus.io import read_manifest
from cytorus.operator import F_components, F_op, LinearizedOperator, MAProblem, taming_margin
from cytorus.problems import manufactured
from cytorus.suites import atlas_suite, deformation_suite, identities_suite, random_taming_state

TP = 2 * np.pi
MASS_TOL = 1e-10
MEAN_TOL = 1e-12


def conservation(trace):
    """Worst relative mass defect and |mean phi| over the accepted steps."""
    recs = trace.records
    return max(r.mass_defect for r in recs), max(r.mean_phi for r in recs)


@pytest.fixture(scope="module")
def manufactured_run():
    grid = TorusGrid(2, 16)
    mf = manufactured(grid, seed=7, margin=0.35)
    t0 = time.perf_counter()
    res = continuity_solve(mf.problem, keep_states=True)
    wall = time.perf_counter() - t0
    return mf, res, wall


@pytest.fixture(scope="module")
def n1_runs():
    grid = TorusGrid(1, 128)
    rng = np.random.default_rng(2024)
    runs = []
    for _ in range(5):
        f = grid.random_bandlimited(rng, kmax=6, amplitude=rng.uniform(0.3, 1.0))
        prob = MAProblem(grid, ACSField.standard(grid), f)
        runs.append((f, prob, continuity_solve(prob)))
    return grid, runs


@pytest.fixture(scope="module")
def synthetic_run():
    grid = TorusGrid(2, 8)
    J = synthetic_J(grid, np.random.default_rng(1007), amplitude=0.15)
    x = grid.coords()
    f = 0.3 * np.cos(TP * (x[0] + x[3])) - 0.2 * np.sin(TP * x[1])
    prob = MAProblem(grid, J, f)
    return prob, continuity_solve(prob)


def test_01_manufactured_recovery(manufactured_run, record):
    mf, res, wall = manufactured_run
    err = np.abs(res.phi - mf.phi_star).max() / np.abs(mf.phi_star).max()
    ok = mf.margin >= 0.3 and err <= 1e-6 and wall <= 60.0
    record("1. manufactured recovery", ok,
           f"margin={mf.margin:.3f} rel_err={err:.2e} (<=1e-6) wall={wall:.1f}s (<=60s)")
    assert ok


def n1_fourier_oracle(f, m):
    """Independent route: 1 + lap phi = A e^f by one division in numpy.fft."""
    A = 1.0 / np.mean(np.exp(f))
    k = np.fft.fftfreq(m, 1.0 / m)
    k2 = (TP * k[:, None]) ** 2 + (TP * k[None, :]) ** 2
    R = np.fft.fft2(A * np.exp(f) - 1.0)
    k2[0, 0] = 1.0
    P = -R / k2
    P[0, 0] = 0.0
    return np.fft.ifft2(P).real


def test_02_n1_exact_reduction(n1_runs, record):
    grid, runs = n1_runs
    worst = max(np.abs(res.phi - n1_fourier_oracle(f, grid.m)).max() for f, _, res in runs)
    ok = worst <= 1e-9
    record("2. n=1 closed form", ok, f"5 solves on m=128, max |phi - oracle| = {worst:.2e} (<=1e-9)")
    assert ok


def test_03_linearization_order(record):
    grid = TorusGrid(3, 8)
    prob = MAProblem(grid, ACSField.standard(grid), np.zeros(grid.shape))
    rng = np.random.default_rng(33)
    eps = np.array([0.04, 0.02, 0.01])
    orders = []
    for _ in range(20):
        phi = random_taming_state(prob, rng, kmax=1, margin_floor=0.5)
        u = grid.random_bandlimited(rng, 1, 1.0)
        Lu = LinearizedOperator(phi, prob).apply(u)
        errs = [np.abs((F_op(phi + e * u, prob) - F_op(phi - e * u, prob)) / (2 * e) - Lu).max()
                for e in eps]
        orders.append(np.polyfit(np.log(eps), np.log(errs), 1)[0])
    lo, hi = min(orders), max(orders)
    ok = abs(lo - 2.0) <= 0.2 and abs(hi - 2.0) <= 0.2
    record("3. linearization order", ok, f"20 pairs on n=3, m=8, order in [{lo:.4f}, {hi:.4f}] (2 +- 0.2)")
    assert ok


def test_04_component_sum(record):
    grid = TorusGrid(2, 16)
    J = synthetic_J(grid, np.random.default_rng(1007), amplitude=0.15)
    prob = MAProblem(grid, J, np.zeros(grid.shape))
    rng = np.random.default_rng(4)
    worst, f0, f1 = 0.0, np.inf, np.inf
    for _ in range(4):
        phi = random_taming_state(prob, rng)
        assert taming_margin(phi, prob) > 0
        F0, F1 = F_components(phi, prob)
        worst = max(worst, np.abs(F0 + F1 - F_op(phi, prob)).max())
        f0, f1 = min(f0, F0.min()), min(f1, F1.min())
    ok = worst <= 1e-8 and f0 > 0 and f1 >= -1e-10
    record("4. component sum", ok,
           f"|F0+F1-F|={worst:.2e} (<=1e-8) min F0={f0:.3f} (>0) min F1={f1:.2e} (>=-1e-10)")
    assert ok


def test_05_pointwise_identities(manufactured_run, record):
    mf, res, _ = manufactured_run
    prod = norm = 0.0
    lbd = -np.inf
    for s, phi in res.states:
        ps = problem_at(mf.problem, s)
        scan = pointwise_identity_scan(phi, ps)
        prod, norm = max(prod, scan["product"]), max(norm, scan["da_norm"])
        lbd = max(lbd, laplacian_bound_defect(phi, ps))
    ok = prod <= 1e-9 and norm <= 1e-9 and lbd <= 1e-8
    record("5. pointwise identities", ok,
           f"{len(res.states)} states: product={prod:.2e} norm={norm:.2e} (<=1e-9) "
           f"lbd={lbd:.2e} (<=1e-8)")
    assert ok


def laplacian_defect(m):
    grid = TorusGrid(2, m, "stencil4")
    x1, y1, x2, y2 = grid.coords()
    eps = 0.006
    phi = eps * (np.cos(TP * x1) + 0.5 * np.sin(TP * (x1 + y2))
                 + 0.3 * np.cos(TP * (y1 - x2)) + 0.4 * np.sin(TP * (x2 + y1)))
    zero = MAProblem(grid, ACSField.standard(grid), np.zeros(grid.shape))
    prob = MAProblem(grid, zero.J, np.log(F_op(phi, zero)), A=1.0)
    return laplacian_identity_check(phi, prob)["defect"]


def test_06_laplacian_identity_refinement(record):
    ms = (8, 16, 32)
    defects = [laplacian_defect(m) for m in ms]
    orders = [np.log2(a / b) for a, b in zip(defects, defects[1:])]
    need = TorusGrid(1, 8, "stencil4").scheme_order - 1
    ok = all(o >= need for o in orders)
    record("6. laplacian identity", ok,
           f"defects {', '.join(f'{d:.2e}' for d in defects)}; orders "
           f"{', '.join(f'{o:.2f}' for o in orders)} (>= {need})")
    assert ok


def test_07_wedge_positivity(record):
    grid = TorusGrid(2, 8)
    prob = MAProblem(grid, ACSField.standard(grid), np.zeros(grid.shape))
    _, summary = identities_suite(prob, np.zeros(grid.shape), states=50, seed=5, pairs=0)
    gmin = -summary["wedge_G_min"]["value"]
    ok = gmin >= -1e-10
    record("7. wedge positivity", ok, f"50 taming states, min G_j = {gmin:.2e} (>=-1e-10)")
    assert ok


def test_08_deformation_suite(record):
    _, summary = deformation_suite(samples=1000, seed=1, max_n=4)
    failed = [k for k, c in summary.items() if not c["pass"]]
    ok = not failed
    detail = ", ".join(f"{k}={c['value']:.1e}" for k, c in summary.items()
                       if k in ("S_symplectic", "g1_recovery", "C_at_1"))
    record("8. deformation suite", ok, f"1000 samples, {detail}" + (f"; failed {failed}" if failed else ""))
    assert ok


def test_09_atlas_suite(record):
    rows, summary = atlas_suite(m=32, Ns=(2, 4), overlap=0.1, seed=3)
    failed = [k for k, c in summary.items() if not c["pass"]]
    ok = not failed
    record("9. atlas suite", ok,
           f"N=2,4 gluing={summary['gluing']['value']:.1e} stokes={summary['stokes_pieces']['value']:.1e} "
           f"mismatch={summary['mismatch_detected']['value']:.1e}"
           + (f"; failed {failed}" if failed else ""))
    assert ok


def test_10_conservation(manufactured_run, n1_runs, synthetic_run, record):
    traces = [manufactured_run[1].trace] + [r.trace for _, _, r in n1_runs[1]] + [synthetic_run[1].trace]
    mass = max(conservation(t)[0] for t in traces)
    mean = max(conservation(t)[1] for t in traces)
    steps = sum(len(t.records) for t in traces)
    ok = mass <= MASS_TOL and mean <= MEAN_TOL
    record("10. conservation", ok,
           f"{len(traces)} solves, {steps} steps: mass={mass:.1e} (<=1e-10) mean={mean:.1e} (<=1e-12)")
    assert ok


SUITE_CFG = """problem.n = 2
problem.m = 8
problem.f = builtin:manufactured
deform.samples = 100
atlas.N = 2, 4
identities.states = 10
identities.pairs = 50
"""


def run_suite(base, cfg):
    codes = {}
    codes["solve"] = main(["solve", "--config", cfg, "--out", str(base / "solve")])
    codes["verify"] = main(["verify", "--config", cfg, "--field", str(base / "solve" / "phi.cyfd"),
                            "--out", str(base / "verify")])
    for cmd in ("deform", "atlas-check", "identities"):
        codes[cmd] = main([cmd, "--config", cfg, "--out", str(base / cmd)])
    return codes


def test_11_determinism(tmp_path, record):
    cfg = tmp_path / "suite.cfg"
    cfg.write_text(SUITE_CFG)
    a = run_suite(tmp_path / "a", str(cfg))
    b = run_suite(tmp_path / "b", str(cfg))
    same_files, same_hash = True, True
    for sub in ("solve", "verify", "deform", "atlas-check", "identities"):
        da, db = tmp_path / "a" / sub, tmp_path / "b" / sub
        names = sorted(p.name for p in da.iterdir() if p.name != "manifest.json")
        _, mismatch, errors = filecmp.cmpfiles(da, db, names, shallow=False)
        same_files &= not mismatch and not errors
        ma, mb = read_manifest(da / "manifest.json"), read_manifest(db / "manifest.json")
        same_hash &= ma["hash"] == mb["hash"] and ma["hashed"] == mb["hashed"]
    ok = a == b and all(c == 0 for c in a.values()) and same_files and same_hash
    record("11. determinism", ok,
           f"exit codes {a}; byte-identical outputs={same_files}; hashed manifests equal={same_hash}")
    assert ok
