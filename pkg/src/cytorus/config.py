"""Run configuration: ``key = value`` lines, ``#`` comments, dotted keys.

Example::

    # manufactured solve on T^4
    problem.n = 2
    problem.m = 16
    problem.f = builtin:manufactured
    solver.newton_tol = 1e-10
    output.dir = runs/m16

``problem.f`` accepts ``builtin:NAME``, ``file:PATH`` (a scalar field file)
or ``expr:TEXT`` (the expression language of :mod:`cytorus.problems`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _intlist(text):
    text = text.strip()
    return tuple(int(v) for v in text.split(",") if v.strip()) if text else ()


SCHEMA = {
    "problem.n": (int, 2),
    "problem.m": (int, 16),
    "problem.scheme": (str, "spectral"),
    "problem.f": (str, "builtin:manufactured"),
    "problem.seed": (int, 7),
    "problem.J": (str, "standard"),
    "problem.J_amplitude": (float, 0.15),
    "solver.s_step_init": (float, 0.1),
    "solver.s_step_min": (float, 1e-4),
    "solver.newton_tol": (float, 1e-10),
    "solver.newton_max": (int, 30),
    "solver.linear_tol": (float, 1e-10),
    "solver.preconditioner": (str, "fourier-laplacian"),
    "solver.restart": (int, 60),
    "monitors.estimates": (_bool, True),
    "monitors.identities": (_bool, True),
    "monitors.conservation": (_bool, True),
    "monitors.recovery_tol": (float, 1e-6),
    "monitors.laplacian_bound_tol": (float, 1e-8),
    "monitors.identity_tol": (float, 1e-9),
    "monitors.wedge_tol": (float, 1e-10),
    "monitors.mass_tol": (float, 1e-10),
    "monitors.mean_tol": (float, 1e-12),
    "output.dir": (str, "cy-out"),
    "verify.field": (str, ""),
    "verify.solution_tol": (float, 1e-8),
    "deform.samples": (int, 1000),
    "deform.seed": (int, 1),
    "deform.max_n": (int, 4),
    "atlas.m": (int, 32),
    "atlas.N": (_intlist, (2, 4)),
    "atlas.overlap": (float, 0.1),
    "atlas.seed": (int, 3),
    "identities.states": (int, 50),
    "identities.pairs": (int, 200),
    "identities.seed": (int, 5),
    "heatmap.field": (str, ""),
    "heatmap.axes": (_intlist, (0, 1)),
    "heatmap.fixed": (_intlist, ()),
    "heatmap.output": (str, "heatmap.pgm"),
}


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: {k: v for k, (_, v) in SCHEMA.items()})
    explicit: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)

    def __getitem__(self, key):
        return self.values[key]

    def section(self, name):
        pre = name + "."
        return {k[len(pre):]: v for k, v in self.values.items() if k.startswith(pre)}

    def set(self, key, raw, line=None):
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", line)
        conv = SCHEMA[key][0]
        try:
            val = conv(raw) if conv is not str else raw.strip()
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}", line) from exc
        self.values[key] = val
        self.explicit[key] = val

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def echo(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in sorted(self.values.items())}


def parse_config(text: str, base_dir=None) -> RunConfig:
    cfg = RunConfig()
    if base_dir is not None:
        cfg.base_dir = Path(base_dir)
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if not key or any(c.isspace() for c in key):
            raise ConfigError(f"malformed key {key!r}", lineno)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first set on line {seen[key]})", lineno)
        seen[key] = lineno
        cfg.set(key, val, lineno)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text, base_dir=path.parent)
