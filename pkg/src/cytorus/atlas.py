"""Chart covers of the torus by periodic boxes, first-chart-wins partitions,
chart-wise potentials and measurable (piecewise) metric checks.

A chart ``V_k`` is an open axis-aligned periodic box given by an origin and
an extent per axis; an extent of 1 spans the whole circle. With
``V_1 .. V_N`` in order,

    W_k = V_k minus the closures of V_1 .. V_{k-1}
    T_k = V_k minus V_1 .. V_{k-1}

so the ``T_k`` tile the grid exactly while the ``W_k`` miss the points lying
on earlier chart boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CoverGap, NotExact, NotPositiveDefinite, ParameterOutOfRange
from .exterior import Form, exterior_d, hodge_star
from .fields import dJd_matrix, project_types_matrix
from .pointwise import J_std, omega_std

EDGE_TOL = 1e-9  # in units of the grid spacing


@dataclass(frozen=True)
class Chart:
    origin: tuple
    extent: tuple

    def to_line(self) -> str:
        o = " ".join(repr(float(v)) for v in self.origin)
        e = " ".join(repr(float(v)) for v in self.extent)
        return f"origin {o} extent {e}"

    @classmethod
    def from_line(cls, line: str):
        tok = line.split()
        if not tok or tok[0] != "origin" or "extent" not in tok:
            raise ValueError(f"bad chart line: {line!r}")
        i = tok.index("extent")
        origin = tuple(float(v) for v in tok[1:i])
        extent = tuple(float(v) for v in tok[i + 1:])
        if len(origin) != len(extent) or not origin:
            raise ValueError(f"bad chart line: {line!r}")
        return cls(origin, extent)


def _axis_offsets(grid, origin, extent):
    """Offsets ``(x - origin) mod 1`` in grid units per axis and the extents."""
    m = grid.m
    idx = np.arange(m, dtype=float)
    offs = [np.mod(idx - o * m, m) for o in origin]
    return offs, [e * m for e in extent]


def _box_masks(grid, chart: Chart):
    """``(open_mask, closed_mask)`` of a chart on the grid."""
    offs, ext = _axis_offsets(grid, chart.origin, chart.extent)
    open_1d, closed_1d = [], []
    m = grid.m
    for off, e in zip(offs, ext):
        if e >= m - EDGE_TOL:
            open_1d.append(np.ones(m, bool))
            closed_1d.append(np.ones(m, bool))
            continue
        at_start = (off < EDGE_TOL) | (off > m - EDGE_TOL)
        at_end = np.abs(off - e) < EDGE_TOL
        inside = (off > EDGE_TOL) & (off < e - EDGE_TOL) & ~at_start
        open_1d.append(inside)
        closed_1d.append(inside | at_start | at_end)

    def outer(parts):
        mask = parts[0]
        for p in parts[1:]:
            mask = np.logical_and.outer(mask, p)
        return mask

    return outer(open_1d), outer(closed_1d)


def _split_counts(N, d):
    """Distribute the prime factors of N over the leading axes."""
    counts = [1] * d
    p, rest = 2, N
    factors = []
    while rest > 1:
        while rest % p == 0:
            factors.append(p)
            rest //= p
        p += 1
    for q in sorted(factors, reverse=True):
        a = int(np.argmin(counts[:2] if d >= 2 else counts))
        counts[a] *= q
    return counts


@dataclass
class ChartPartition:
    grid: object
    charts: list
    V: list = field(repr=False)
    closures: list = field(repr=False)
    W: list = field(repr=False)
    T: list = field(repr=False)

    @property
    def N(self):
        return len(self.charts)

    @property
    def owner(self):
        """Index of the chart whose ``T_k`` holds each grid point."""
        own = np.full(self.grid.shape, -1, dtype=np.int64)
        for k, t in enumerate(self.T):
            own[t] = k
        return own

    def skeleton_count(self) -> int:
        return int(self.grid.npoints - np.logical_or.reduce(self.W).sum())

    def check(self) -> dict:
        """Partition bookkeeping: T_k disjoint and exhaustive, W_k within T_k."""
        count = np.sum(self.T, axis=0)
        return {
            "covered": bool(np.logical_or.reduce(self.V).all()),
            "disjoint": bool(count.max() <= 1),
            "exhaustive": bool(count.min() >= 1),
            "W_in_T": bool(all(np.all(t | ~w) for w, t in zip(self.W, self.T))),
            "skeleton": self.skeleton_count(),
        }

    def overlaps(self):
        for i in range(self.N):
            for j in range(i + 1, self.N):
                ov = self.V[i] & self.V[j]
                if ov.any():
                    yield i, j, ov

    def to_text(self) -> str:
        return "".join(c.to_line() + "\n" for c in self.charts)

    @classmethod
    def from_text(cls, grid, text: str):
        lines = (ln.split("#", 1)[0].strip() for ln in text.splitlines())
        charts = [Chart.from_line(ln) for ln in lines if ln]
        return partition_from_charts(grid, charts)


def partition_from_charts(grid, charts) -> ChartPartition:
    if len(charts) < 1:
        raise ParameterOutOfRange("need at least one chart")
    for c in charts:
        if len(c.origin) != grid.d:
            raise ParameterOutOfRange(f"chart of dimension {len(c.origin)} on {grid}")
        if any(not 0 < e for e in c.extent):
            raise ParameterOutOfRange("chart extents must be positive")
    V, closures = zip(*(_box_masks(grid, c) for c in charts))
    V, closures = list(V), list(closures)
    union = np.logical_or.reduce(V)
    if not union.all():
        miss = np.argwhere(~union)
        raise CoverGap(f"{len(miss)} grid points outside every chart, first at index "
                       f"{tuple(int(i) for i in miss[0])}")
    W, T = [], []
    seen_open = np.zeros(grid.shape, bool)
    seen_closed = np.zeros(grid.shape, bool)
    for v, cl in zip(V, closures):
        T.append(v & ~seen_open)
        W.append(v & ~seen_closed)
        seen_open |= v
        seen_closed |= cl
    return ChartPartition(grid=grid, charts=list(charts), V=V, closures=closures, W=W, T=T)


def build_partition(grid, N: int, overlap: float) -> ChartPartition:
    """``N`` boxes on a product lattice of cells, each widened by ``overlap``
    times its cell length on both sides."""
    if not isinstance(N, (int, np.integer)) or N < 2:
        raise ParameterOutOfRange(f"need N >= 2 charts, got {N}")
    if not 0.0 <= overlap < 0.5:
        raise ParameterOutOfRange(f"overlap must lie in [0, 0.5), got {overlap}")
    counts = _split_counts(int(N), grid.d)
    charts = []
    for cell in np.ndindex(*counts):
        origin, extent = [], []
        for a, (i, c) in enumerate(zip(cell, counts)):
            if c == 1:
                origin.append(0.0)
                extent.append(1.0)
            else:
                L = 1.0 / c
                origin.append((i * L - overlap * L) % 1.0)
                extent.append(L * (1 + 2 * overlap))
        charts.append(Chart(tuple(origin), tuple(extent)))
    return partition_from_charts(grid, charts)


# ------------------------------------------------------------------ potentials


@dataclass
class ChartPotential:
    partition: ChartPartition
    potentials: list        # full-grid arrays, NaN outside the chart
    offsets: list           # chart constant relative to the global potential
    gluing_defect: float
    residual: float
    global_potential: np.ndarray


def _as_matrix(da, d):
    if isinstance(da, Form):
        return da.to_matrix()
    da = np.asarray(da, float)
    if da.shape[-2:] != (d, d):
        raise ParameterOutOfRange("da must be a 2-form or an antisymmetric matrix field")
    return da


def local_potentials(da, partition: ChartPartition, J=None, omega=None,
                     tol: float = 1e-8) -> ChartPotential:
    """Per-chart potentials ``phi_k`` with ``dJd phi_k = da`` on ``V_k``.

    The trace of the (1,1) part is inverted on the torus; each chart keeps
    the restriction, normalized to mean zero over its own points. Nonzero
    periods or a non-(1,1) remainder raise ``NotExact``.
    """
    grid = partition.grid
    n, d = grid.n, grid.d
    J = J_std(n) if J is None else np.asarray(J, float)
    omega = omega_std(n) if omega is None else np.asarray(omega, float)
    if J.shape != (d, d):
        raise ParameterOutOfRange("charts carry a constant J")
    B = _as_matrix(da, d)
    scale = max(float(np.abs(B).max()), 1.0)
    period = np.abs(grid.mean(B)).max()
    if period > tol * scale:
        raise NotExact(f"da has nonzero periods (max mean component {period:.3e})")
    if d > 2:
        dB = exterior_d(Form.from_matrix(B), lambda v, ax: grid.deriv(v, ax))
        closed = float(np.abs(dB.c).max())
        if closed > tol * scale * grid.m:
            raise NotExact(f"da is not closed (|d da| = {closed:.3e})")
    p11, _ = project_types_matrix(B, J)
    G = omega @ J
    G = 0.5 * (G + G.T)
    Ginv = np.linalg.inv(G)
    trace = 0.5 * np.einsum("ab,...bc,ca->...", Ginv, p11, J)
    sym = sum(Ginv[a, b] * grid.hess_symbol(a, b) for a in range(d) for b in range(d))
    sym = np.array(sym, dtype=complex)
    sym.flat[0] = 1.0
    Psi = grid.fft(trace) / sym
    Psi.flat[0] = 0.0
    psi = grid.ifft(Psi)
    residual = float(np.abs(dJd_matrix(psi, grid, J) - B).max())
    if residual > tol * scale:
        raise NotExact(f"da is not dd^c-exact (residual {residual:.3e})")
    pots, offs = [], []
    for v in partition.V:
        c = float(psi[v].mean())
        p = np.full(grid.shape, np.nan)
        p[v] = psi[v] - c
        pots.append(p)
        offs.append(-c)
    glob = np.zeros(grid.shape)
    for p, t in zip(pots, partition.T):
        glob[t] = p[t]
    glob -= grid.mean(glob)
    return ChartPotential(partition=partition, potentials=pots, offsets=offs,
                          gluing_defect=gluing_defect(pots, partition),
                          residual=residual, global_potential=glob)


def gluing_defect(potentials, partition: ChartPartition) -> float:
    """Largest standard deviation of ``phi_i - phi_j`` over chart overlaps."""
    worst = 0.0
    for i, j, ov in partition.overlaps():
        diff = potentials[i][ov] - potentials[j][ov]
        worst = max(worst, float(np.std(diff)))
    return worst


# ------------------------------------------------------------ metric checks


def _metric_on(g, grid):
    g = np.asarray(g, float)
    if g.ndim == 2:
        return np.broadcast_to(g, grid.shape + g.shape)
    return g


def _per_chart(metrics, partition):
    if isinstance(metrics, (list, tuple)):
        if len(metrics) != partition.N:
            raise ParameterOutOfRange("need one metric per chart")
        return [_metric_on(g, partition.grid) for g in metrics]
    return [_metric_on(metrics, partition.grid)] * partition.N


def quasi_isometry_constant(g_a, g_b, partition: ChartPartition) -> float:
    """Smallest ``C >= 1`` with ``g_a / C <= g_b <= C g_a`` on every chart."""
    A = _per_chart(g_a, partition)
    Bm = _per_chart(g_b, partition)
    lo, hi = np.inf, 0.0
    for ga, gb, v in zip(A, Bm, partition.V):
        ga, gb = ga[v], gb[v]
        try:
            L = np.linalg.cholesky(0.5 * (ga + np.swapaxes(ga, -1, -2)))
            np.linalg.cholesky(0.5 * (gb + np.swapaxes(gb, -1, -2)))
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite("metric is not positive definite") from exc
        Li = np.linalg.inv(L)
        M = Li @ gb @ np.swapaxes(Li, -1, -2)
        ev = np.linalg.eigvalsh(0.5 * (M + np.swapaxes(M, -1, -2)))
        lo = min(lo, float(ev[..., 0].min()))
        hi = max(hi, float(ev[..., -1].max()))
    return max(1.0, hi, 1.0 / lo)


def measurable_stokes_check(alpha, partition: ChartPartition, metrics=None) -> float:
    """``|sum_k int_{T_k} d alpha_k|`` through chart-wise metric densities.

    ``alpha`` is one ``(2n-1)``-form field or a list of per-chart fields that
    should agree on overlaps. Each top form is converted to a density with
    the chart's metric and weighted back by its volume element, so the sum
    is metric independent whenever the pieces glue.
    """
    grid = partition.grid
    d = grid.d
    pieces = list(alpha) if isinstance(alpha, (list, tuple)) else [alpha] * partition.N
    if len(pieces) != partition.N:
        raise ParameterOutOfRange("need one form per chart")
    gs = _per_chart(np.eye(d) if metrics is None else metrics, partition)
    total = 0.0
    for a_k, g_k, t in zip(pieces, gs, partition.T):
        if a_k.k != d - 1:
            raise ParameterOutOfRange(f"expected a {d - 1}-form")
        top = exterior_d(a_k, lambda v, ax: grid.deriv(v, ax))
        dens = hodge_star(top, g_k).c[..., 0] * np.sqrt(np.linalg.det(g_k))
        total += float(np.sum(dens[t])) / grid.npoints
    return abs(total)


def form_norm(alpha: Form) -> float:
    return float(np.abs(alpha.c).max())
