"""Uniform periodic grid on the unit torus and its derivative schemes.

Scalar fields are arrays of shape ``(m,) * 2n``; axis ``a`` carries the real
coordinate ``x_a = i_a / m`` with the ordering ``(x1, y1, x2, y2, ...)``.
Both schemes are realized as Fourier multipliers: ``spectral`` uses exact
symbols on a sign-consistent lift of the Nyquist frequencies, ``stencil4``
uses the symbols of the periodic fourth-order centered difference stencils,
so applying them is identical to convolving with the stencils.
"""

from __future__ import annotations

from functools import cached_property

import os

import numpy as np
import scipy.fft as sfft

from .errors import DimensionMismatch, ParameterOutOfRange

SCHEMES = ("spectral", "stencil4")
MAX_N = 3


def fft_workers() -> int:
    """Transform parallelism, capped by ``CY_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("CY_THREADS", "1")))
    except ValueError:
        return 1


class TorusGrid:
    def __init__(self, n: int, m: int, scheme: str = "spectral"):
        if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_N:
            raise ParameterOutOfRange(f"n must be in 1..{MAX_N}, got {n}")
        if not isinstance(m, (int, np.integer)) or m < 8 or m & (m - 1):
            raise ParameterOutOfRange(f"m must be a power of two >= 8, got {m}")
        if scheme not in SCHEMES:
            raise ParameterOutOfRange(f"unknown scheme {scheme!r}")
        self.n, self.m, self.scheme = int(n), int(m), scheme
        self.d = 2 * self.n
        self.h = 1.0 / self.m
        self.shape = (self.m,) * self.d
        self.axes = tuple(range(self.d))

    def __repr__(self):
        return f"TorusGrid(n={self.n}, m={self.m}, scheme={self.scheme!r})"

    def __eq__(self, other):
        return (isinstance(other, TorusGrid)
                and (self.n, self.m, self.scheme) == (other.n, other.m, other.scheme))

    def __hash__(self):
        return hash((self.n, self.m, self.scheme))

    @property
    def npoints(self) -> int:
        return self.m**self.d

    @property
    def scheme_order(self):
        return None if self.scheme == "spectral" else 4

    def with_scheme(self, scheme):
        return TorusGrid(self.n, self.m, scheme)

    def coords(self):
        """List of coordinate arrays, one per real axis."""
        x = np.arange(self.m) * self.h
        return np.meshgrid(*([x] * self.d), indexing="ij")

    # ------------------------------------------------------------ symbols

    @cached_property
    def _kint(self):
        """Integer frequencies per axis in the rfft layout, broadcast-ready."""
        m = self.m
        ks = []
        for a in range(self.d):
            if a == self.d - 1:
                k = np.fft.rfftfreq(m, d=1.0 / m)
            else:
                k = np.fft.fftfreq(m, d=1.0 / m)
            shape = [1] * self.d
            shape[a] = k.size
            ks.append(np.rint(k).astype(np.int64).reshape(shape))
        return ks

    @cached_property
    def _lift(self):
        """Real wavevector lift ``(k_tilde, self_conjugate)``.

        A Nyquist component is ambiguous in sign. It is lifted to
        ``+-pi m`` with the sign of the first component that is neither 0
        nor Nyquist, which makes the lift odd under ``k -> -k``. Modes whose
        components are all 0 or Nyquist equal their own conjugate; they get
        the ``+pi m`` lift and no first derivative.
        """
        half = self.m // 2
        full = np.broadcast_shapes(*(k.shape for k in self._kint))
        sign = np.zeros(full, dtype=np.int64)
        nyq = [np.broadcast_to(np.abs(k) == half, full) for k in self._kint]
        for k, ny in zip(self._kint, nyq):
            kb = np.broadcast_to(k, full)
            sign = np.where((sign == 0) & ~ny & (kb != 0), np.sign(kb), sign)
        selfconj = sign == 0
        sign = np.where(selfconj, 1, sign)
        lift = []
        for k, ny in zip(self._kint, nyq):
            kb = np.broadcast_to(k, full).astype(float)
            lift.append(2 * np.pi * np.where(ny, half * sign, kb))
        return lift, selfconj

    @cached_property
    def d1_symbols(self):
        """First-derivative multipliers."""
        h = self.h
        out = []
        if self.scheme == "spectral":
            lift, selfconj = self._lift
            for kt in lift:
                out.append(np.where(selfconj, 0.0, 1j * kt))
        else:
            for k in self._kint:
                kk = 2 * np.pi * k
                out.append(1j * (8 * np.sin(kk * h) - np.sin(2 * kk * h)) / (6 * h))
        return out

    @cached_property
    def _hess_cache(self):
        return {}

    def hess_symbol(self, a, b):
        """Multiplier of ``d_a d_b``; spectral mode uses ``-k_a k_b`` on the lift."""
        key = (min(a, b), max(a, b))
        cache = self._hess_cache
        if key not in cache:
            if self.scheme == "spectral":
                lift, _ = self._lift
                cache[key] = -(lift[a] * lift[b]) + 0j
            elif a == b:
                k = 2 * np.pi * self._kint[a]
                h = self.h
                cache[key] = -(30 - 32 * np.cos(k * h) + 2 * np.cos(2 * k * h)) / (12 * h * h) + 0j
            else:
                cache[key] = self.d1_symbols[a] * self.d1_symbols[b]
        return cache[key]

    @cached_property
    def laplacian_symbol(self):
        return sum(self.hess_symbol(a, a) for a in range(self.d))

    # ------------------------------------------------------------ transforms

    def fft(self, u):
        return sfft.rfftn(u, axes=self.axes, workers=fft_workers())

    def ifft(self, U):
        return sfft.irfftn(U, s=self.shape, axes=self.axes, workers=fft_workers())

    def _check(self, u):
        u = np.asarray(u)
        if u.shape[: self.d] != self.shape:
            raise DimensionMismatch(f"field of shape {u.shape} on grid {self.shape}")
        return u

    def _apply(self, u, symbol):
        """Multiply by ``symbol`` along grid axes; trailing axes are components."""
        u = self._check(u)
        extra = u.ndim - self.d
        U = self.fft(u)
        sym = symbol.reshape(symbol.shape + (1,) * extra)
        return self.ifft(U * sym)

    # ------------------------------------------------------------ derivatives

    def deriv(self, u, axis):
        return self._apply(u, self.d1_symbols[axis])

    def grad(self, u):
        u = self._check(u)
        U = self.fft(u)
        return np.stack([self.ifft(U * s) for s in self.d1_symbols], axis=-1)

    def hessian(self, u):
        """Symmetric matrix of second partials, shape ``(*grid, d, d)``."""
        u = self._check(u)
        U = self.fft(u)
        d = self.d
        Hs = np.empty(self.shape + (d, d))
        for a in range(d):
            for b in range(a, d):
                v = self.ifft(U * self.hess_symbol(a, b))
                Hs[..., a, b] = v
                Hs[..., b, a] = v
        return Hs

    def laplacian(self, u):
        return self._apply(u, self.laplacian_symbol)

    def inverse_laplacian(self, r):
        """Mean-zero solution of ``lap u = r - mean(r)``."""
        r = self._check(r)
        R = self.fft(r)
        sym = np.array(self.laplacian_symbol, dtype=complex)
        sym.flat[0] = 1.0
        U = R / sym
        U.flat[0] = 0.0
        return self.ifft(U)

    # ------------------------------------------------------------ quadrature

    def integrate(self, u):
        """Integral over the unit torus with the flat volume ``dx^{2n}``."""
        u = self._check(u)
        return np.sum(u, axis=self.axes) / self.npoints

    def mean(self, u):
        return self.integrate(u)

    def random_bandlimited(self, rng, kmax: int = 3, amplitude: float = 1.0, decay: float = 1.0,
                           components=()):
        """Random real field with Fourier support in ``|k_a| <= kmax``."""
        if 2 * kmax >= self.m:
            raise ParameterOutOfRange(f"kmax={kmax} reaches the Nyquist mode of m={self.m}")
        components = tuple(components)
        U = np.zeros(self.shape + components, dtype=complex)
        idx = np.arange(-kmax, kmax + 1)
        sub = np.ix_(*([idx % self.m] * self.d))
        coef = (rng.standard_normal((2 * kmax + 1,) * self.d + components)
                + 1j * rng.standard_normal((2 * kmax + 1,) * self.d + components))
        kk = np.meshgrid(*([idx] * self.d), indexing="ij")
        weight = (1.0 + sum(k.astype(float) ** 2 for k in kk)) ** (-decay)
        coef = coef * weight.reshape(weight.shape + (1,) * len(components))
        U[sub] = coef
        u = np.fft.ifftn(U, axes=self.axes).real
        u = u - u.mean(axis=self.axes)
        scale = np.abs(u).max()
        return u * (amplitude / scale) if scale > 0 else u
