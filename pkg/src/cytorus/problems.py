"""Problem data: builtin right-hand sides, manufactured solutions and a small
expression language for smooth periodic ``f``.

Expression grammar (whitespace ignored)::

    expr  := term (("+" | "-") term)*
    term  := ["-"] number ["*" wave] | ["-"] wave
    wave  := ("sin" | "cos") "(" lin ")"
    lin   := ["-"] mono (("+" | "-") mono)*
    mono  := [integer ["*"]] var
    var   := x1 | y1 | x2 | y2 | ...

``sin(lin)`` means ``sin(2 pi lin)``, so every wave is periodic on the unit
torus, e.g. ``0.2*cos(x1 + 2*y1) - 0.1*sin(y2) + 0.3``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, ParameterOutOfRange
from .fields import ACSField, synthetic_J
from .grid import TorusGrid
from .operator import F_op, MAProblem, taming_margin

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)"
                    r"|(sin|cos)|([xy]\d+)|(.))")


def _tokens(text):
    out = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        mt = _TOKEN.match(text, pos)
        if mt is None or mt.end() == pos:
            break
        num, fn, var, sym = mt.groups()
        if num is not None:
            out.append(("num", num))
        elif fn is not None:
            out.append(("fn", fn))
        elif var is not None:
            out.append(("var", var))
        elif not sym.isspace():
            out.append(("sym", sym))
        pos = mt.end()
    return out


@dataclass(frozen=True)
class Wave:
    coef: float
    kind: str          # "sin", "cos" or "const"
    k: tuple           # integer wavevector


class _Parser:
    def __init__(self, text, n):
        self.toks = _tokens(text)
        self.i = 0
        self.n = n
        self.text = text

    def _peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def _take(self, kind=None, val=None):
        tk = self._peek()
        if tk[0] is None or (kind and tk[0] != kind) or (val and tk[1] != val):
            want = val or kind or "token"
            raise ConfigError(f"expected {want} in f expression {self.text!r}")
        self.i += 1
        return tk

    def _axis(self, name):
        j, kind = int(name[1:]), name[0]
        if not 1 <= j <= self.n:
            raise ConfigError(f"variable {name} out of range for n={self.n}")
        return 2 * (j - 1) + (0 if kind == "x" else 1)

    def parse(self):
        terms = [self._term(1.0)]
        while self._peek() in (("sym", "+"), ("sym", "-")):
            sign = 1.0 if self._take()[1] == "+" else -1.0
            terms.append(self._term(sign))
        if self._peek()[0] is not None:
            raise ConfigError(f"trailing input in f expression {self.text!r}")
        return terms

    def _term(self, sign):
        if self._peek() == ("sym", "-"):
            self._take()
            sign = -sign
        if self._peek()[0] == "num":
            c = sign * float(self._take()[1])
            if self._peek() == ("sym", "*"):
                self._take()
                return self._wave(c)
            return Wave(c, "const", (0,) * (2 * self.n))
        return self._wave(sign)

    def _wave(self, c):
        kind = self._take("fn")[1]
        self._take("sym", "(")
        k = [0] * (2 * self.n)
        sign = 1
        if self._peek() == ("sym", "-"):
            self._take()
            sign = -1
        while True:
            mult = 1
            if self._peek()[0] == "num":
                tok = self._take()[1]
                if not tok.isdigit():
                    raise ConfigError(f"wave numbers must be integers in {self.text!r}")
                mult = int(tok)
                if self._peek() == ("sym", "*"):
                    self._take()
            k[self._axis(self._take("var")[1])] += sign * mult
            if self._peek() in (("sym", "+"), ("sym", "-")):
                sign = 1 if self._take()[1] == "+" else -1
                continue
            break
        self._take("sym", ")")
        return Wave(c, kind, tuple(k))


def parse_expression(text: str, n: int):
    return _Parser(text, n).parse()


def eval_expression(text: str, grid: TorusGrid) -> np.ndarray:
    x = grid.coords()
    out = np.zeros(grid.shape)
    for w in parse_expression(text, grid.n):
        if w.kind == "const":
            out += w.coef
            continue
        arg = 2 * np.pi * sum(kk * xx for kk, xx in zip(w.k, x) if kk)
        out += w.coef * (np.sin(arg) if w.kind == "sin" else np.cos(arg))
    return out


# ---------------------------------------------------------------- manufactured


@dataclass
class Manufactured:
    problem: MAProblem
    phi_star: np.ndarray
    margin: float


def manufactured(grid: TorusGrid, seed: int = 7, margin: float = 0.35, kmax: int = 2,
                 J=None) -> Manufactured:
    """Band-limited ``phi*`` scaled to a prescribed taming margin and
    ``f = log F(phi*)``, so ``phi*`` solves the discrete equation with A = 1."""
    if not 0 < margin < 1:
        raise ParameterOutOfRange("target margin must lie in (0, 1)")
    J = ACSField.standard(grid) if J is None else J
    rng = np.random.default_rng(seed)
    shape = grid.random_bandlimited(rng, kmax, 1.0)
    zero = MAProblem(grid, J, np.zeros(grid.shape), A=1.0)
    base = taming_margin(np.zeros(grid.shape), zero)
    if margin >= base:
        raise ParameterOutOfRange(f"target margin {margin} not below the background {base:.3f}")

    def gap(amp):
        return taming_margin(amp * shape, zero) - margin

    hi = 1e-3
    while gap(hi) > 0:
        hi *= 2
        if hi > 1e3:
            raise ParameterOutOfRange("could not reach the target taming margin")
    amp = brentq(gap, 0.0, hi, xtol=1e-14, rtol=1e-12)
    phi_star = amp * shape
    F = F_op(phi_star, zero)
    if F.min() <= 0:
        raise ParameterOutOfRange("manufactured state has non-positive volume ratio")
    prob = MAProblem(grid, J, np.log(F), A=1.0)
    return Manufactured(problem=prob, phi_star=phi_star, margin=taming_margin(phi_star, zero))


def n1_closed_form(f, grid: TorusGrid, A: float = None):
    """n = 1: ``1 + lap phi = A e^f`` solved by one Fourier division."""
    if grid.n != 1:
        raise ParameterOutOfRange("closed form exists for n = 1 only")
    A = 1.0 / grid.integrate(np.exp(f)) if A is None else A
    return grid.inverse_laplacian(A * np.exp(f) - 1.0)


BUILTINS = ("zero", "manufactured", "manufactured-n1", "manufactured-n2", "bump")


def builtin_problem(name: str, n: int, m: int, scheme: str = "spectral", seed: int = 7,
                    J_kind: str = "standard", J_amplitude: float = 0.15):
    """Returns ``(problem, phi_star_or_None)``."""
    if name == "manufactured-n1":
        n = 1
    elif name == "manufactured-n2":
        n = 2
    grid = TorusGrid(n, m, scheme)
    if J_kind == "standard":
        J = ACSField.standard(grid)
    elif J_kind == "synthetic":
        J = synthetic_J(grid, np.random.default_rng(seed + 1000), amplitude=J_amplitude)
    else:
        raise ConfigError(f"unknown J kind {J_kind!r}")
    if name == "zero":
        return MAProblem(grid, J, np.zeros(grid.shape)), None
    if name in ("manufactured", "manufactured-n1", "manufactured-n2"):
        mf = manufactured(grid, seed=seed, J=J)
        return mf.problem, mf.phi_star
    if name == "bump":
        x = grid.coords()
        f = 0.5 * np.cos(2 * np.pi * x[0]) * np.cos(2 * np.pi * x[1])
        return MAProblem(grid, J, f), None
    raise ConfigError(f"unknown builtin problem {name!r}; choose from {', '.join(BUILTINS)}")
