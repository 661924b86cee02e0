"""Exterior algebra on R^d with components stored over sorted index tuples.

A k-form is held as an array whose last axis enumerates
``itertools.combinations(range(d), k)`` in lexicographic order; leading axes
are grid axes (possibly none). All tables are cached per ``(d, k, l)``.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations
from math import comb, factorial

import numpy as np

from .errors import DegreeOverflow, DimensionMismatch


@lru_cache(maxsize=None)
def basis(d: int, k: int):
    return tuple(combinations(range(d), k))


@lru_cache(maxsize=None)
def index_of(d: int, k: int):
    return {I: i for i, I in enumerate(basis(d, k))}


def _perm_sign(seq):
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
            elif seq[i] == seq[j]:
                return 0
    return sign


@lru_cache(maxsize=None)
def wedge_table(d: int, k: int, l: int):
    """Arrays ``(i, j, out, sign)`` with ``e_I ^ e_J = sign * e_K``."""
    if k + l > d:
        raise DegreeOverflow(f"degree {k}+{l} exceeds dimension {d}")
    out_index = index_of(d, k + l)
    rows = []
    for i, I in enumerate(basis(d, k)):
        for j, Jx in enumerate(basis(d, l)):
            if set(I) & set(Jx):
                continue
            s = _perm_sign(I + Jx)
            rows.append((i, j, out_index[tuple(sorted(I + Jx))], s))
    arr = np.array(rows, dtype=np.int64).reshape(-1, 4)
    return arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3].astype(float)


@lru_cache(maxsize=None)
def d_table(d: int, k: int):
    """``(out, src, axis, sign)`` with ``(d a)_K = sum sign * D_axis a_src``."""
    src_index = index_of(d, k)
    rows = []
    for o, K in enumerate(basis(d, k + 1)):
        for p, ax in enumerate(K):
            rest = K[:p] + K[p + 1:]
            rows.append((o, src_index[rest], ax, (-1) ** p))
    arr = np.array(rows, dtype=np.int64).reshape(-1, 4)
    return arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3].astype(float)


class Form:
    """A (field of) k-form(s) on R^d."""

    __slots__ = ("d", "k", "c")

    def __init__(self, d: int, k: int, comps):
        comps = np.asarray(comps)
        if comps.shape[-1:] != (comb(d, k),):
            raise DimensionMismatch(
                f"{k}-form on R^{d} needs {comb(d, k)} components, got {comps.shape}")
        self.d, self.k, self.c = d, k, comps

    @property
    def shape(self):
        return self.c.shape[:-1]

    @classmethod
    def zeros(cls, d, k, shape=(), dtype=float):
        return cls(d, k, np.zeros(tuple(shape) + (comb(d, k),), dtype=dtype))

    @classmethod
    def one(cls, d, shape=()):
        return cls(d, 0, np.ones(tuple(shape) + (1,)))

    @classmethod
    def from_vector(cls, v):
        v = np.asarray(v)
        return cls(v.shape[-1], 1, v)

    @classmethod
    def from_matrix(cls, B):
        """Two-form ``sum_{a<b} B_ab e_a ^ e_b`` from an antisymmetric matrix."""
        B = np.asarray(B)
        d = B.shape[-1]
        idx = np.array(basis(d, 2), dtype=np.int64).reshape(-1, 2)
        return cls(d, 2, B[..., idx[:, 0], idx[:, 1]])

    def to_matrix(self):
        if self.k != 2:
            raise DimensionMismatch("to_matrix needs a 2-form")
        d = self.d
        M = np.zeros(self.shape + (d, d), dtype=self.c.dtype)
        for i, (a, b) in enumerate(basis(d, 2)):
            M[..., a, b] = self.c[..., i]
            M[..., b, a] = -self.c[..., i]
        return M

    def top(self):
        if self.k != self.d:
            raise DimensionMismatch(f"degree {self.k} is not top degree {self.d}")
        return self.c[..., 0]

    def __add__(self, other):
        _same(self, other)
        return Form(self.d, self.k, self.c + other.c)

    def __sub__(self, other):
        _same(self, other)
        return Form(self.d, self.k, self.c - other.c)

    def __neg__(self):
        return Form(self.d, self.k, -self.c)

    def scale(self, s):
        s = np.asarray(s)
        return Form(self.d, self.k, self.c * s[..., None])

    def conj(self):
        return Form(self.d, self.k, np.conj(self.c))

    @property
    def real(self):
        return Form(self.d, self.k, self.c.real)

    def __xor__(self, other):
        return wedge(self, other)


def _same(a: Form, b: Form):
    if a.d != b.d or a.k != b.k:
        raise DimensionMismatch(f"({a.d},{a.k}) vs ({b.d},{b.k})")


@lru_cache(maxsize=None)
def _wedge_groups(d: int, k: int, l: int):
    i, j, o, s = wedge_table(d, k, l)
    return tuple(tuple((int(i[t]), int(j[t]), float(s[t])) for t in np.flatnonzero(o == q))
                 for q in range(comb(d, k + l)))


def wedge(a: Form, b: Form) -> Form:
    if a.d != b.d:
        raise DimensionMismatch(f"dimensions {a.d} and {b.d} differ")
    if a.k + b.k > a.d:
        raise DegreeOverflow(f"degree {a.k}+{b.k} exceeds dimension {a.d}")
    shape = np.broadcast_shapes(a.shape, b.shape)
    dtype = np.result_type(a.c, b.c)
    # component-first views keep each product contiguous
    ac = np.moveaxis(a.c, -1, 0)
    bc = np.moveaxis(b.c, -1, 0)
    groups = _wedge_groups(a.d, a.k, b.k)
    out = np.empty((len(groups),) + shape, dtype=dtype)
    tmp = np.empty(shape, dtype=dtype)
    for q, terms in enumerate(groups):
        acc = out[q, ...]
        acc[...] = 0
        for i, j, s in terms:
            np.multiply(ac[i, ...], bc[j, ...], out=tmp)
            if s > 0:
                acc += tmp
            else:
                acc -= tmp
    return Form(a.d, a.k + b.k, np.moveaxis(out, 0, -1))


def power(a: Form, p: int) -> Form:
    out = Form.one(a.d, a.shape)
    for _ in range(p):
        out = wedge(out, a)
    return out


def exterior_d(form: Form, deriv) -> Form:
    """Exterior derivative given ``deriv(values, axis)`` acting on grid axes.

    ``deriv`` receives an array ``(*grid, ncomp)`` and returns its partial
    derivative along the given grid axis.
    """
    d, k = form.d, form.k
    if k + 1 > d:
        raise DegreeOverflow(f"d of a {k}-form on R^{d}")
    o, src, ax, s = d_table(d, k)
    out = np.zeros(form.shape + (comb(d, k + 1),), dtype=form.c.dtype)
    for axis in range(d):
        sel = ax == axis
        D = deriv(form.c[..., src[sel]], axis)
        for t, (oo, ss) in enumerate(zip(o[sel], s[sel])):
            out[..., oo] += ss * D[..., t]
    return Form(d, k + 1, out)


@lru_cache(maxsize=None)
def _complement(d: int, k: int):
    """For each k-index I: (index of complement J in degree d-k, sign of (I, J))."""
    idx = index_of(d, d - k)
    comp, sign = [], []
    for I in basis(d, k):
        Jx = tuple(a for a in range(d) if a not in I)
        comp.append(idx[Jx])
        sign.append(_perm_sign(I + Jx))
    return np.array(comp, dtype=np.int64), np.array(sign, dtype=float)


def compound(M, k: int):
    """k-th compound matrix (all k x k minors) of a (field of) square matrices."""
    M = np.asarray(M)
    d = M.shape[-1]
    B = basis(d, k)
    out = np.empty(M.shape[:-2] + (len(B), len(B)), dtype=M.dtype)
    if k == 0:
        out[...] = 1.0
        return out
    for r, I in enumerate(B):
        for c, K in enumerate(B):
            out[..., r, c] = np.linalg.det(M[..., I, :][..., :, K])
    return out


def hodge_star(form: Form, G) -> Form:
    """Hodge star for the metric ``G`` (matrix or field of matrices) and
    orientation ``e_0 ^ ... ^ e_{d-1}``; ``a ^ *b = <a, b> vol_g``."""
    d, k = form.d, form.k
    G = np.asarray(G, float)
    Ginv = np.linalg.inv(G)
    raised = np.einsum("...ij,...j->...i", compound(Ginv, k), form.c)
    vol = np.sqrt(np.linalg.det(G))
    comp, sign = _complement(d, k)
    out = np.zeros(np.broadcast_shapes(form.shape, G.shape[:-2]) + (comb(d, d - k),),
                   dtype=np.result_type(form.c, float))
    out[..., comp] = raised * sign * np.asarray(vol)[..., None]
    return Form(d, d - k, out)


def inner(a: Form, b: Form, G):
    """Pointwise metric inner product of two k-forms."""
    _same(a, b)
    Ginv = np.linalg.inv(np.asarray(G, float))
    return np.einsum("...i,...ij,...j->...", a.c, compound(Ginv, a.k), np.conj(b.c))


def top_coef_of_power(B: Form, n: int):
    """Coefficient of ``B^n`` on ``e_0 ^ ... ^ e_{2n-1}`` (equals n! Pf B)."""
    return power(B, n).top()


def volume_factor(n: int) -> float:
    return float(factorial(n))
