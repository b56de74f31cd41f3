"""Run configuration: INI parsing, validation and emission.

A configuration file has these sections (keys marked * are required for
the modes that need them)::

    [run]       mode*
    [params]    n_atoms*, gamma1*, gamma2* | gamma_ratio*, mu1 | mu_ratio, mu2,
                rabi | omega_bar, initial_excited
    [geometry]  dicke, positions, wavenumber1, wavenumber2
    [time]      t_end*, unit, n_points, spacing
    [solver]    rel, abs, max_step, min_step, method, seed_policy, seed_epsilon
    [output]    dir, svg, log_time
    [sweep]     omega_bar*, workers
    [analyze]   input*
    [compare]   run_a*, run_b*, columns, tolerance, time_column

Any key may be overridden from the environment as
``LAMBDASR__<SECTION>__<KEY>`` (for example ``LAMBDASR__SOLVER__REL=1e-8``).
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Tuple

from .errors import ConfigError
from .integrator import Tolerances
from .meanfield import SeedPolicy
from .model import Geometry, SystemParams

__all__ = ["MODES", "RunConfig", "parse_config", "emit_config", "ENV_PREFIX"]

MODES = ("meanfield", "exact", "single-atom", "sweep", "analyze", "compare")
ENV_PREFIX = "LAMBDASR__"

_ALLOWED = {
    "run": {"mode"},
    "params": {"n_atoms", "gamma1", "gamma2", "gamma_ratio", "mu1", "mu2", "mu_ratio",
               "rabi", "omega_bar", "initial_excited"},
    "geometry": {"dicke", "positions", "wavenumber1", "wavenumber2"},
    "time": {"t_end", "unit", "n_points", "spacing"},
    "solver": {"rel", "abs", "max_step", "min_step", "method", "seed_policy", "seed_epsilon"},
    "output": {"dir", "svg", "log_time"},
    "sweep": {"omega_bar", "workers"},
    "analyze": {"input"},
    "compare": {"run_a", "run_b", "columns", "tolerance", "time_column"},
}

_SIM_MODES = ("meanfield", "exact", "single-atom", "sweep")


@dataclass(frozen=True)
class RunConfig:
    mode: str
    params: Optional[SystemParams] = None
    dicke: bool = False
    geometry: Optional[Geometry] = None
    t_end: Optional[float] = None
    unit: str = "fast"
    n_points: int = 2001
    spacing: str = "linear"
    tol: Tolerances = Tolerances()
    method: str = "auto"
    seed: SeedPolicy = SeedPolicy()
    out_dir: str = "out"
    svg: bool = True
    log_time: bool = False
    sweep_omega_bar: Tuple[float, ...] = ()
    workers: int = 1
    analyze_input: Optional[str] = None
    compare_a: Optional[str] = None
    compare_b: Optional[str] = None
    compare_columns: Tuple[str, ...] = ()
    compare_tolerance: float = 1e-8
    compare_time_column: str = "t_scaled_fast"


def _line_of(text: str, section: str, key: Optional[str] = None) -> Optional[int]:
    current = None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip().lower()
            if key is None and current == section:
                return i
            continue
        if key is not None and current == section:
            k = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
            if k == key:
                return i
    return None


class _Reader:
    """Typed access to a parsed file, collecting every problem before failing."""

    def __init__(self, cp: configparser.ConfigParser, text: str, origin: Dict):
        self.cp = cp
        self.text = text
        self.origin = origin
        self.errors = []
        self.missing = []

    def where(self, section, key):
        src = self.origin.get((section, key))
        if src:
            return f"[{section}] {key} (from {src})"
        line = _line_of(self.text, section, key)
        return f"[{section}] {key}" + (f" (line {line})" if line else "")

    def has(self, section, key):
        return self.cp.has_option(section, key)

    def raw(self, section, key, default=None, required=False):
        if self.has(section, key):
            return self.cp.get(section, key).strip()
        if required:
            self.missing.append(f"[{section}] {key}")
        return default

    def typed(self, section, key, conv, what, default=None, required=False):
        v = self.raw(section, key, None, required)
        if v is None:
            return default
        try:
            return conv(v)
        except (ValueError, TypeError):
            self.errors.append(f"{self.where(section, key)}: expected {what}, got {v!r}")
            return default

    def num(self, section, key, default=None, required=False):
        return self.typed(section, key, _float, "a number", default, required)

    def integer(self, section, key, default=None, required=False):
        return self.typed(section, key, _int, "an integer", default, required)

    def boolean(self, section, key, default=None):
        return self.typed(section, key, _bool, "a boolean (true/false/on/off)", default)

    def choice(self, section, key, options, default):
        v = self.raw(section, key, default)
        if v not in options:
            self.errors.append(f"{self.where(section, key)}: must be one of {', '.join(options)}, got {v!r}")
            return default
        return v

    def fail(self, section, key, msg):
        self.errors.append(f"{self.where(section, key)}: {msg}")


def _float(s):
    v = float(s)
    if math.isnan(v):
        raise ValueError("nan")
    return v


def _int(s):
    f = float(s)
    if not f.is_integer():
        raise ValueError(s)
    return int(f)


def _bool(s):
    s = s.lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(s)


def _floats(s):
    return tuple(_float(x) for x in re.split(r"[,\s]+", s.strip()) if x)


def _positions(s):
    pts = []
    for chunk in s.split(";"):
        if chunk.strip():
            xyz = _floats(chunk)
            if len(xyz) != 3:
                raise ValueError(chunk)
            pts.append(xyz)
    return tuple(pts)


def _env_overrides(env: Mapping[str, str]):
    out = {}
    for name, value in env.items():
        if not name.startswith(ENV_PREFIX):
            continue
        parts = name[len(ENV_PREFIX):].lower().split("__")
        if len(parts) != 2 or not all(parts):
            raise ConfigError(f"malformed override variable {name}: expected {ENV_PREFIX}SECTION__KEY")
        out[tuple(parts)] = (value, f"environment {name}")
    return out


def parse_config(text: str, env: Optional[Mapping[str, str]] = None,
                 overrides: Optional[Mapping[Tuple[str, str], object]] = None) -> RunConfig:
    """Parse and validate INI text.

    ``env`` supplies ``LAMBDASR__SECTION__KEY`` variables; ``overrides``
    maps ``(section, key)`` to values (used for command-line flags) and wins
    over both the file and the environment. Unknown sections or keys,
    missing required keys and type errors are all reported together in one
    :class:`ConfigError`.
    """
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from None
    origin = {}
    layered = dict(_env_overrides(env or {}))
    for k, v in (overrides or {}).items():
        layered[k] = (v, "command line")
    for (section, key), (value, src) in layered.items():
        if value is None:
            continue
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key, str(value))
        origin[(section, key)] = src

    r = _Reader(cp, text, origin)
    for section in cp.sections():
        if section not in _ALLOWED:
            line = _line_of(text, section)
            r.errors.append(f"unknown section [{section}]" + (f" (line {line})" if line else ""))
            continue
        for key in cp.options(section):
            if key not in _ALLOWED[section]:
                r.errors.append(f"{r.where(section, key)}: unknown key")

    mode = r.raw("run", "mode", required=True)
    if mode is not None and mode not in MODES:
        r.fail("run", "mode", f"must be one of {', '.join(MODES)}, got {mode!r}")
        mode = None
    effective = mode or "meanfield"
    kw = {"mode": effective}

    if effective in _SIM_MODES:
        kw.update(_read_simulation(r, effective))
    if effective == "sweep":
        vals = r.typed("sweep", "omega_bar", _floats, "a list of numbers", (), required=True)
        if any(v < 0 for v in vals):
            r.fail("sweep", "omega_bar", "values must be >= 0")
        if vals == () and r.has("sweep", "omega_bar"):
            r.fail("sweep", "omega_bar", "empty list")
        kw["sweep_omega_bar"] = tuple(vals)
        workers = r.integer("sweep", "workers", 1)
        if workers is not None and workers < 1:
            r.fail("sweep", "workers", "must be >= 1")
        kw["workers"] = workers
    if effective == "analyze":
        kw["analyze_input"] = r.raw("analyze", "input", required=True)
    if effective == "compare":
        kw["compare_a"] = r.raw("compare", "run_a", required=True)
        kw["compare_b"] = r.raw("compare", "run_b", required=True)
        cols = r.raw("compare", "columns", "")
        kw["compare_columns"] = tuple(c for c in re.split(r"[,\s]+", cols) if c)
        tol = r.num("compare", "tolerance", 1e-8)
        if tol is not None and not tol >= 0:
            r.fail("compare", "tolerance", "must be >= 0")
        kw["compare_tolerance"] = tol
        kw["compare_time_column"] = r.raw("compare", "time_column", "t_scaled_fast")

    kw["out_dir"] = r.raw("output", "dir", "out")
    kw["svg"] = r.boolean("output", "svg", True)
    kw["log_time"] = r.boolean("output", "log_time", False)

    problems = []
    if r.missing:
        problems.append("missing required keys: " + ", ".join(r.missing))
    problems.extend(r.errors)
    if problems:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(problems))
    try:
        return RunConfig(**kw)
    except ConfigError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None


def _read_simulation(r: _Reader, mode: str) -> dict:
    kw = {}
    n = r.integer("params", "n_atoms", 1 if mode == "single-atom" else None,
                  required=mode != "single-atom")
    g1 = r.num("params", "gamma1", required=True)
    g2 = r.num("params", "gamma2")
    ratio = r.num("params", "gamma_ratio")
    if r.has("params", "gamma2") and r.has("params", "gamma_ratio"):
        r.fail("params", "gamma_ratio", "give either gamma2 or gamma_ratio, not both")
    elif not (r.has("params", "gamma2") or r.has("params", "gamma_ratio")):
        r.missing.append("[params] gamma2")
    mu2 = r.num("params", "mu2", 1.0)
    mu1 = r.num("params", "mu1")
    mu_ratio = r.num("params", "mu_ratio")
    if r.has("params", "mu1") and r.has("params", "mu_ratio"):
        r.fail("params", "mu_ratio", "give either mu1 or mu_ratio, not both")
    rabi = r.num("params", "rabi")
    omega_bar = r.num("params", "omega_bar")
    if r.has("params", "rabi") and r.has("params", "omega_bar"):
        r.fail("params", "omega_bar", "give either rabi or omega_bar, not both")
    if omega_bar is not None and omega_bar < 0:
        r.fail("params", "omega_bar", "must be >= 0")
    if rabi is not None and rabi < 0:
        r.fail("params", "rabi", "must be >= 0")
    excited = r.num("params", "initial_excited")

    if mode == "single-atom" and n not in (None, 1):
        r.fail("params", "n_atoms", "single-atom mode needs n_atoms = 1")

    t_end = r.num("time", "t_end", required=True)
    if t_end is not None and not t_end > 0:
        r.fail("time", "t_end", "must be > 0")
    kw["t_end"] = t_end
    kw["unit"] = r.choice("time", "unit", ("fast", "slow", "physical"), "fast")
    n_points = r.integer("time", "n_points", 2001)
    if n_points is not None and n_points < 3:
        r.fail("time", "n_points", "must be >= 3")
    kw["n_points"] = n_points
    kw["spacing"] = r.choice("time", "spacing", ("linear", "log"), "linear")

    rel = r.num("solver", "rel", 1e-10)
    abs_ = r.num("solver", "abs", 1e-13)
    max_step = r.num("solver", "max_step", math.inf)
    min_step = r.num("solver", "min_step", 1e-14)
    try:
        kw["tol"] = Tolerances(rel, abs_, max_step, min_step)
    except (ValueError, TypeError) as exc:
        r.fail("solver", "rel", str(exc))
    kw["method"] = r.choice("solver", "method", ("auto", "explicit", "stiff"), "auto")
    policy = r.choice("solver", "seed_policy", ("none", "fluctuation"), "none")
    eps = r.num("solver", "seed_epsilon", 1.0)
    try:
        kw["seed"] = SeedPolicy(policy, eps)
    except (ConfigError, TypeError) as exc:
        r.fail("solver", "seed_epsilon", str(exc))

    dicke = r.boolean("geometry", "dicke", False)
    kw["dicke"] = dicke
    pos = r.typed("geometry", "positions", _positions, "'x,y,z; x,y,z; ...'")
    if pos is not None:
        k1 = r.num("geometry", "wavenumber1", 2 * math.pi)
        k2 = r.num("geometry", "wavenumber2", 2 * math.pi)
        try:
            kw["geometry"] = Geometry(pos, k1, k2)
        except ConfigError as exc:
            r.fail("geometry", "positions", str(exc))
        if dicke:
            r.fail("geometry", "dicke", "dicke = true ignores positions; give one or the other")
        if n is not None and len(pos) != n:
            r.fail("geometry", "positions", f"{len(pos)} positions for n_atoms = {n}")
    elif r.has("geometry", "wavenumber1") or r.has("geometry", "wavenumber2"):
        r.fail("geometry", "positions", "wavenumbers given without positions")

    if r.missing or r.errors or None in (n, g1) or (g2 is None and ratio is None):
        return kw
    gamma2 = g2 if g2 is not None else ratio * g1
    if mu1 is None:
        mu1 = mu2 / mu_ratio if mu_ratio else 1.0
    if omega_bar is not None:
        rabi = omega_bar * mu1 * g1 * n
    try:
        kw["params"] = SystemParams(n, g1, gamma2, mu1, mu2, rabi or 0.0, excited)
    except ConfigError as exc:
        r.errors.append(str(exc))
    if kw["unit"] == "slow" and gamma2 == 0:
        r.fail("time", "unit", "slow time is undefined for gamma2 = 0")
    return kw


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_config(cfg: RunConfig) -> str:
    """INI text that :func:`parse_config` turns back into ``cfg``."""
    out = ["[run]", f"mode = {cfg.mode}", ""]
    if cfg.mode in _SIM_MODES:
        p = cfg.params
        out += ["[params]", f"n_atoms = {p.n_atoms}", f"gamma1 = {_fmt(p.gamma1)}",
                f"gamma2 = {_fmt(p.gamma2)}", f"mu1 = {_fmt(p.mu1)}", f"mu2 = {_fmt(p.mu2)}",
                f"rabi = {_fmt(p.rabi)}", f"initial_excited = {_fmt(p.initial_excited)}", ""]
        out += ["[geometry]", f"dicke = {str(cfg.dicke).lower()}"]
        if cfg.geometry is not None:
            g = cfg.geometry
            pts = "; ".join(",".join(_fmt(v) for v in r) for r in g.positions)
            out += [f"positions = {pts}", f"wavenumber1 = {_fmt(g.wavenumber1)}",
                    f"wavenumber2 = {_fmt(g.wavenumber2)}"]
        out += ["", "[time]", f"t_end = {_fmt(cfg.t_end)}", f"unit = {cfg.unit}",
                f"n_points = {cfg.n_points}", f"spacing = {cfg.spacing}", ""]
        t = cfg.tol
        out += ["[solver]", f"rel = {_fmt(t.rel)}", f"abs = {_fmt(t.abs)}",
                f"max_step = {_fmt(t.max_step)}", f"min_step = {_fmt(t.min_step)}",
                f"method = {cfg.method}", f"seed_policy = {cfg.seed.kind}",
                f"seed_epsilon = {_fmt(cfg.seed.epsilon)}", ""]
    if cfg.mode == "sweep":
        out += ["[sweep]", "omega_bar = " + ", ".join(_fmt(v) for v in cfg.sweep_omega_bar),
                f"workers = {cfg.workers}", ""]
    if cfg.mode == "analyze":
        out += ["[analyze]", f"input = {cfg.analyze_input}", ""]
    if cfg.mode == "compare":
        out += ["[compare]", f"run_a = {cfg.compare_a}", f"run_b = {cfg.compare_b}",
                "columns = " + ", ".join(cfg.compare_columns),
                f"tolerance = {_fmt(cfg.compare_tolerance)}",
                f"time_column = {cfg.compare_time_column}", ""]
    out += ["[output]", f"dir = {cfg.out_dir}", f"svg = {str(cfg.svg).lower()}",
            f"log_time = {str(cfg.log_time).lower()}", ""]
    return "\n".join(out)
