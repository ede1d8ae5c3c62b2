"""Experiment configuration files and initial-data presets.

Configs are INI-style text with the sections ``[grid]``, ``[model]``,
``[initial]``, ``[time]``, ``[output]`` and ``[certificate]``::

    [grid]
    dim = 1
    n = 256
    c = 1.0

    [model]
    kind = constant        ; constant | carleman | power_law
    k0 = 1.0

    [initial]
    preset = sine          ; equilibrium | sine | random_band | blocks | clamped_sine
    m = 1.0
    amp = 0.5

    [time]
    t_end = 20.0           ; dt defaults to 2h/c; or give dt, or cfl_cells
    record_every = 1

Unknown sections or keys are rejected with their line number.
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigurationError
from .fields import Field, Grid
from .interaction import CarlemanRate, ConstantRate, InteractionModel, PowerLawRate
from .solver import cfl_cells, steps_for

PRESETS = ("equilibrium", "sine", "random_band", "blocks", "clamped_sine")
THEOREM_CHOICES = ("auto", "all", "T1D_type3", "T1D_type1", "T3D_type3", "T3D_type1")

_ALLOWED = {
    "grid": {"dim", "n", "c"},
    "model": {"kind", "k0", "k1", "alpha", "picard_sweeps"},
    "initial": {"preset", "m", "amp", "mode", "modes", "seed", "levels"},
    "time": {"t_end", "dt", "cfl_cells", "record_every", "check_every_step"},
    "output": {"csv", "checkpoint", "certificate"},
    "certificate": {"eps_policy", "eps", "theorem"},
}
_REQUIRED = {"grid": {"dim", "n"}, "time": {"t_end"}, "initial": {"preset"}, "model": {"kind"}}


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "constant"
    k0: float = 1.0
    k1: float = 1.0
    alpha: float = 0.0
    picard_sweeps: int = 0

    def build(self) -> InteractionModel:
        if self.kind == "constant":
            return ConstantRate(self.k0)
        if self.kind == "carleman":
            return CarlemanRate()
        if self.kind == "power_law":
            return PowerLawRate(self.k1, self.alpha)
        raise ConfigurationError(f"unknown model kind {self.kind!r}")


@dataclass(frozen=True)
class InitialSpec:
    preset: str = "equilibrium"
    m: float = 1.0
    amp: float = 0.0
    mode: int = 1
    modes: int = 4
    seed: int = 0
    levels: tuple = ()


@dataclass(frozen=True)
class SimConfig:
    dim: int
    n: int
    c: float
    dt: float
    t_end: float
    record_every: int = 1
    model: ModelSpec = field(default_factory=ModelSpec)
    initial: InitialSpec = field(default_factory=InitialSpec)
    eps_policy: str = "auto"
    eps: float = 0.0
    theorem: str = "auto"
    check_every_step: bool = True
    dt_explicit: bool = False      # False: dt follows the grid as a whole number of CFL cells
    csv_path: Optional[str] = None
    checkpoint_path: Optional[str] = None
    certificate_path: Optional[str] = None
    source: Optional[str] = None

    @property
    def grid(self) -> Grid:
        return Grid(self.dim, self.n)

    @property
    def nsteps(self) -> int:
        return steps_for(self.t_end, self.dt)

    def with_overrides(self, **kw) -> "SimConfig":
        """Copy with dotted overrides such as ``model.alpha=0.5`` (validated)."""
        flat = to_mapping(self)
        for key, value in kw.items():
            section, _, name = key.rpartition(".")
            if not section:
                section = _section_of(name)
            if name not in _ALLOWED.get(section, ()):
                raise ConfigurationError(f"unknown override key {key!r}")
            flat.setdefault(section, {})[name] = str(value)
            if section == "time" and name in ("dt", "cfl_cells"):
                flat["time"].pop("cfl_cells" if name == "dt" else "dt", None)
        return from_mapping(flat, source=self.source)


def _section_of(name):
    hits = [s for s, keys in _ALLOWED.items() if name in keys]
    if len(hits) != 1:
        raise ConfigurationError(f"ambiguous or unknown key {name!r}; use section.key")
    return hits[0]


def _line_numbers(text: str) -> dict:
    """Map ``(section, key)`` and ``(section, None)`` to 1-based line numbers."""
    out = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            out.setdefault((section, None), lineno)
        elif section and line and line[0] not in "#;":
            key = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
            out.setdefault((section, key), lineno)
    return out


def parse_config(path) -> SimConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file {path} does not exist")
    return parse_config_text(path.read_text(), source=str(path))


def parse_config_text(text: str, source: Optional[str] = None) -> SimConfig:
    where = source or "<config>"
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        cp.read_string(text, source=where)
    except configparser.Error as exc:
        raise ConfigurationError(f"{where}: {exc}") from None
    lines = _line_numbers(text)
    mapping = {}
    for section in cp.sections():
        if section not in _ALLOWED:
            raise ConfigurationError(
                f"{where}:{lines.get((section, None), '?')}: unknown section [{section}]")
        for key, value in cp.items(section):
            if key not in _ALLOWED[section]:
                raise ConfigurationError(
                    f"{where}:{lines.get((section, key), '?')}: unknown key {key!r} in [{section}]")
        mapping[section] = dict(cp.items(section))
    return from_mapping(mapping, source=source, lines=lines)


def _get(mapping, lines, where, section, key, conv, default=None):
    raw = mapping.get(section, {}).get(key)
    if raw is None:
        if default is None and key in _REQUIRED.get(section, ()):
            raise ConfigurationError(f"{where}: missing required key {key!r} in [{section}]")
        return default
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        line = lines.get((section, key), "?")
        raise ConfigurationError(f"{where}:{line}: bad value for {section}.{key} = {raw!r}: {exc}") from None


def _int(raw):
    f = float(raw)
    if not f.is_integer():
        raise ValueError("expected an integer")
    return int(raw) if re.fullmatch(r"\s*[+-]?\d+\s*", str(raw)) else int(f)


def _bool(raw):
    s = str(raw).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _floats(raw):
    return tuple(float(x) for x in str(raw).replace(",", " ").split())


def from_mapping(mapping: dict, source: Optional[str] = None, lines: Optional[dict] = None) -> SimConfig:
    lines = lines or {}
    where = source or "<config>"

    def get(section, key, conv, default=None):
        return _get(mapping, lines, where, section, key, conv, default)

    def fail(section, key, msg):
        raise ConfigurationError(f"{where}:{lines.get((section, key), '?')}: {msg}")

    for section in _REQUIRED:
        if section not in mapping:
            raise ConfigurationError(f"{where}: missing section [{section}]")

    dim = get("grid", "dim", _int)
    n = get("grid", "n", _int)
    c = get("grid", "c", float, 1.0)
    try:
        grid = Grid(dim, n)
    except ValueError as exc:
        fail("grid", "dim", str(exc))
    if not (math.isfinite(c) and c > 0):
        fail("grid", "c", f"wave speed must be positive, got {c}")

    model = ModelSpec(
        kind=get("model", "kind", str, "constant").strip().lower(),
        k0=get("model", "k0", float, 1.0),
        k1=get("model", "k1", float, 1.0),
        alpha=get("model", "alpha", float, 0.0),
        picard_sweeps=get("model", "picard_sweeps", _int, 0),
    )
    if model.kind not in ("constant", "carleman", "power_law"):
        fail("model", "kind", f"unknown model kind {model.kind!r}")
    try:
        built = model.build()
    except ValueError as exc:
        fail("model", "kind", str(exc))

    initial = InitialSpec(
        preset=get("initial", "preset", str).strip().lower(),
        m=get("initial", "m", float, 1.0),
        amp=get("initial", "amp", float, 0.0),
        mode=get("initial", "mode", _int, 1),
        modes=get("initial", "modes", _int, 4),
        seed=get("initial", "seed", _int, 0),
        levels=get("initial", "levels", _floats, ()),
    )
    if initial.preset not in PRESETS:
        fail("initial", "preset", f"unknown preset {initial.preset!r}; choose from {PRESETS}")
    if not 0 <= initial.seed < 2**64:
        fail("initial", "seed", "seed must be a 64-bit unsigned integer")

    t_end = get("time", "t_end", float)
    if not (math.isfinite(t_end) and t_end > 0):
        fail("time", "t_end", f"t_end must be positive, got {t_end}")
    dt = get("time", "dt", float)
    cells = get("time", "cfl_cells", _int)
    if dt is not None and cells is not None:
        fail("time", "dt", "give either dt or cfl_cells, not both")
    if cells is not None:
        if cells < 1:
            fail("time", "cfl_cells", "cfl_cells must be a positive integer")
        dt = 2.0 * cells / (n * c)
    elif dt is None:
        dt = 2.0 / (n * c)
    if not dt > 0:
        fail("time", "dt", "dt must be positive")
    try:
        cfl_cells(grid, c, 0.5 * dt)
    except ConfigurationError:
        fail("time", "dt", f"CFL constraint violated: c*dt/(2h) = {c * dt * n / 2!r} must be a "
                            "whole number of cells (dt a multiple of 2h/c)")
    try:
        steps_for(t_end, dt)
    except ConfigurationError as exc:
        fail("time", "t_end", str(exc))
    record_every = get("time", "record_every", _int, 1)
    if record_every < 1:
        fail("time", "record_every", "record_every must be >= 1")

    eps_policy = get("certificate", "eps_policy", str, "auto").strip().lower()
    if eps_policy not in ("auto", "explicit"):
        fail("certificate", "eps_policy", "eps_policy must be 'auto' or 'explicit'")
    eps = get("certificate", "eps", float, 0.0)
    if eps_policy == "explicit" and not eps >= 0:
        fail("certificate", "eps", "eps must be nonnegative")
    theorem = get("certificate", "theorem", str, "auto").strip()
    if theorem not in THEOREM_CHOICES:
        fail("certificate", "theorem", f"theorem must be one of {THEOREM_CHOICES}")

    cfg = SimConfig(
        dim=dim, n=n, c=c, dt=dt, t_end=t_end, record_every=record_every,
        dt_explicit=get("time", "dt", str) is not None,
        model=model, initial=initial, eps_policy=eps_policy, eps=eps, theorem=theorem,
        check_every_step=get("time", "check_every_step", _bool, True),
        csv_path=get("output", "csv", str), checkpoint_path=get("output", "checkpoint", str),
        certificate_path=get("output", "certificate", str), source=source,
    )
    try:
        species = build_initial(cfg.initial, grid)
    except ValueError as exc:
        fail("initial", "preset", str(exc))
    if built.classify().is_type2 and min(float(f.values.min()) for f in species) <= 0:
        fail("initial", "preset", f"{model.kind} with alpha={model.alpha} is singular at zero; "
                                   "initial data must be bounded away from zero")
    return cfg


def to_mapping(cfg: SimConfig) -> dict:
    ini = cfg.initial
    out = {
        "grid": {"dim": str(cfg.dim), "n": str(cfg.n), "c": repr(cfg.c)},
        "model": {"kind": cfg.model.kind, "k0": repr(cfg.model.k0), "k1": repr(cfg.model.k1),
                  "alpha": repr(cfg.model.alpha), "picard_sweeps": str(cfg.model.picard_sweeps)},
        "initial": {"preset": ini.preset, "m": repr(ini.m), "amp": repr(ini.amp),
                    "mode": str(ini.mode), "modes": str(ini.modes), "seed": str(ini.seed)},
        "time": {"t_end": repr(cfg.t_end),
                 **({"dt": repr(cfg.dt)} if cfg.dt_explicit
                    else {"cfl_cells": str(round(cfg.dt * cfg.n * cfg.c / 2))}),
                 "record_every": str(cfg.record_every),
                 "check_every_step": str(cfg.check_every_step).lower()},
        "certificate": {"eps_policy": cfg.eps_policy, "eps": repr(cfg.eps), "theorem": cfg.theorem},
        "output": {},
    }
    if ini.levels:
        out["initial"]["levels"] = ",".join(repr(x) for x in ini.levels)
    for key, val in (("csv", cfg.csv_path), ("checkpoint", cfg.checkpoint_path),
                     ("certificate", cfg.certificate_path)):
        if val is not None:
            out["output"][key] = val
    return out


def to_text(cfg: SimConfig) -> str:
    lines = []
    for section, items in to_mapping(cfg).items():
        if not items:
            continue
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {v}" for k, v in items.items())
        lines.append("")
    return "\n".join(lines)


# ---------------------------------------------------------------- presets

def _random_band(grid: Grid, amp: float, modes: int, rng: np.random.Generator) -> np.ndarray:
    """Real trigonometric polynomial with all wave numbers in ``1 <= |k|_inf <= modes``,
    Gaussian coefficients, rescaled to sup-norm ``amp``."""
    if modes < 1 or 2 * modes >= grid.n:
        raise ValueError(f"modes must satisfy 1 <= modes < n/2, got {modes}")
    if grid.dim == 1:
        shape = (grid.n // 2 + 1,)
    else:
        shape = (grid.n, grid.n, grid.n // 2 + 1)
    spec = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    freqs = [np.abs(np.fft.fftfreq(grid.n, 1.0 / grid.n))] * (grid.dim - 1)
    freqs.append(np.fft.rfftfreq(grid.n, 1.0 / grid.n))
    kmax = np.zeros(shape)
    for axis, f in enumerate(freqs):
        idx = [None] * grid.dim
        idx[axis] = slice(None)
        kmax = np.maximum(kmax, f[tuple(idx)])
    spec[(kmax > modes) | (kmax == 0)] = 0.0
    noise = np.fft.irfftn(spec, s=grid.shape, axes=range(grid.dim))
    peak = np.max(np.abs(noise))
    return amp * noise / peak if peak > 0 else noise


def build_initial(spec: InitialSpec, grid: Grid) -> list[Field]:
    """Species fields for a preset: 2 in 1D, ``(u1, u2, u3, v1, v2, v3)`` in 3D.

    ``random_band`` clamps at zero after adding noise (documented exception);
    ``clamped_sine`` sets ``u = max(m + amp sin(2 pi x1), 0)``, ``v = m``.
    Every other preset refuses parameters that would produce negative data.
    """
    ncomp = 2 if grid.dim == 1 else 6
    half = ncomp // 2
    x = grid.coords()
    m, amp = float(spec.m), float(spec.amp)
    if not (math.isfinite(m) and math.isfinite(amp)):
        raise ValueError("m and amp must be finite")

    if spec.preset == "equilibrium":
        if m < 0:
            raise ValueError(f"equilibrium level must be >= 0, got {m}")
        arrays = [np.full(grid.shape, m) for _ in range(ncomp)]
    elif spec.preset == "sine":
        if abs(amp) > m:
            raise ValueError(f"sine(m={m}, amp={amp}) takes negative values")
        arrays = [None] * ncomp
        for i in range(half):
            s = np.sin(2 * np.pi * spec.mode * x[i])
            arrays[i] = m + amp * s
            arrays[i + half] = m - amp * s
    elif spec.preset == "clamped_sine":
        s = np.sin(2 * np.pi * spec.mode * x[0])
        arrays = [np.maximum(m + amp * s, 0.0)] + [np.full(grid.shape, m) for _ in range(ncomp - 1)]
        if m < 0:
            raise ValueError("clamped_sine needs m >= 0")
    elif spec.preset == "random_band":
        rng = np.random.default_rng(spec.seed)
        arrays = [np.maximum(m + _random_band(grid, amp, spec.modes, rng), 0.0)
                  for _ in range(ncomp)]
    elif spec.preset == "blocks":
        levels = np.asarray(spec.levels, dtype=np.float64)
        if levels.size == 0:
            raise ValueError("blocks preset needs at least one level")
        if np.any(levels < 0):
            raise ValueError("block levels must be nonnegative")
        which = np.minimum((x[0] * levels.size).astype(int), levels.size - 1)
        arrays = [levels[which] if i < half else levels[::-1][which] for i in range(ncomp)]
    else:
        raise ValueError(f"unknown preset {spec.preset!r}")
    return [Field(grid, a) for a in arrays]
