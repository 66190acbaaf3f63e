"""Experiment configuration: flat ``section.key=value`` text with defaults.

An empty file yields the reference setup: ``L=2``, ``nu=0.01``, ``dt=0.005``,
``sigma=0.04``, ``h=0.5``, ``ell=1/lambda1``, forcing at ``k=(5,5)``.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError, MissingInputError

Mode = tuple[int, int]


@dataclass(frozen=True)
class GridConfig:
    n: int = 32
    L: float = 2.0


@dataclass(frozen=True)
class SolverConfig:
    nu: float = 0.01
    dt: float = 0.005
    forcing: Mode = (5, 5)
    forcing_amplitude: float = 1.0
    t_spin: float = 100.0
    init_amplitude: float = 2.0
    init_kmax: float = 8.0
    backend: str = "auto"


@dataclass(frozen=True)
class ObservationConfig:
    sigma: float = 0.04
    beta: float = 0.0
    # multiple of lambda1; inf means complete observations
    lam: float = math.inf
    h: float = 0.5
    steps: int = 400
    units: str = "velocity"


@dataclass(frozen=True)
class FilterConfig:
    mode: str = "discrete"
    eta: float = 0.04
    alpha: float = 1.0
    # None means 1/lambda1
    ell: float | None = None
    init: str = "spinup"


@dataclass(frozen=True)
class ContinuousConfig:
    omega: float = 100.0
    sigma0: float = 0.005
    beta: float = 0.0
    alpha: float = 0.5
    r_mode: str = "spde"
    T: float = 100.0
    # None means solver.dt
    dt: float | None = None
    record_every: float = 0.5
    order: str = "nse_first"


@dataclass(frozen=True)
class SeedConfig:
    truth: int = 1
    noise: int = 2
    init: int = 3


@dataclass(frozen=True)
class ClassifyConfig:
    hit_within: int = 50
    stay_from: int = 50
    stay_fraction: float = 0.9
    median_from: int = 100
    final_window: int = 50
    diverged_ratio: float = 4.0
    cont_small: float = 0.1
    cont_large: float = 10.0


@dataclass(frozen=True)
class OutputConfig:
    tracked_modes: tuple[Mode, ...] = ((1, 1), (5, 5), (7, 7))
    dir: str = "out"


SECTIONS = {
    "grid": GridConfig,
    "solver": SolverConfig,
    "observation": ObservationConfig,
    "filter": FilterConfig,
    "continuous": ContinuousConfig,
    "seeds": SeedConfig,
    "classify": ClassifyConfig,
    "output": OutputConfig,
}
# config-file spelling -> attribute name
ALIASES = {("observation", "lambda"): "lam"}


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    observation: ObservationConfig = field(default_factory=ObservationConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    continuous: ContinuousConfig = field(default_factory=ContinuousConfig)
    seeds: SeedConfig = field(default_factory=SeedConfig)
    classify: ClassifyConfig = field(default_factory=ClassifyConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def __post_init__(self):
        validate(self)

    @property
    def steps_per_obs(self) -> int:
        return int(round(self.observation.h / self.solver.dt))

    @property
    def continuous_dt(self) -> float:
        return self.solver.dt if self.continuous.dt is None else self.continuous.dt

    def with_values(self, **dotted: Any) -> "ExperimentConfig":
        """Copy with ``{"filter.eta": 0.4, ...}`` style overrides (already typed or strings)."""
        return apply_overrides(self, {k.replace("__", "."): v for k, v in dotted.items()})

    def items(self) -> list[tuple[str, str]]:
        """Resolved ``(key, value)`` pairs in file syntax, for output headers."""
        out = []
        for sec in SECTIONS:
            obj = getattr(self, sec)
            for f in dataclasses.fields(obj):
                key = next((a for (s, a), n in ALIASES.items() if s == sec and n == f.name), f.name)
                out.append((f"{sec}.{key}", format_value(getattr(obj, f.name))))
        return out


def format_value(v: Any) -> str:
    if v is None:
        return "auto"
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    if isinstance(v, tuple) and v and isinstance(v[0], tuple):
        return ";".join(f"{a},{b}" for a, b in v)
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    return str(v)


def _parse_mode(text: str) -> Mode:
    parts = [p.strip() for p in text.replace(":", ",").split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected a mode 'k1,k2', got {text!r}")
    return (int(parts[0]), int(parts[1]))


def _coerce(default: Any, ftype: str, raw: Any) -> Any:
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    if "None" in ftype and text.lower() in ("auto", "none", ""):
        return None
    if "tuple[Mode" in ftype:
        return tuple(_parse_mode(p) for p in text.split(";") if p.strip())
    if ftype == "Mode":
        return _parse_mode(text)
    if ftype == "int":
        return int(text)
    if "float" in ftype:
        return float(text)
    return text


def apply_overrides(cfg: ExperimentConfig, values: dict[str, Any]) -> ExperimentConfig:
    sections = {sec: {} for sec in SECTIONS}
    for key, raw in values.items():
        sec, _, name = key.partition(".")
        if sec not in SECTIONS or not name:
            raise ConfigError(f"unknown config key {key!r}")
        attr = ALIASES.get((sec, name), name)
        fields = {f.name: f for f in dataclasses.fields(SECTIONS[sec])}
        if attr not in fields:
            raise ConfigError(f"unknown config key {key!r}")
        f = fields[attr]
        try:
            sections[sec][attr] = _coerce(f.default, str(f.type), raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
    kwargs = {sec: dataclasses.replace(getattr(cfg, sec), **vals) for sec, vals in sections.items()}
    return ExperimentConfig(**kwargs)


def parse_config(text: str) -> ExperimentConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        values[key.strip()] = val.strip()
    return apply_overrides(ExperimentConfig(), values)


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    p = Path(path)
    if not p.exists():
        raise MissingInputError(f"config file not found: {p}")
    return parse_config(p.read_text(encoding="utf-8"))


def _divisible(t: float, dt: float) -> bool:
    k = round(t / dt)
    return k >= 0 and abs(k * dt - t) <= 1e-9 * max(1.0, abs(t))


def validate(cfg: ExperimentConfig) -> None:
    g, s, o, f, c = cfg.grid, cfg.solver, cfg.observation, cfg.filter, cfg.continuous

    def bad(name, msg):
        raise ConfigError(f"{name}: {msg}")

    if g.n < 4 or g.n % 2:
        bad("grid.n", "must be an even integer >= 4")
    if not g.L > 0:
        bad("grid.L", "must be positive")
    if not s.nu > 0:
        bad("solver.nu", "must be positive")
    if not s.dt > 0:
        bad("solver.dt", "must be positive")
    half = g.n // 2

    def in_band(name, k):
        if not (abs(k[0]) < half and abs(k[1]) < half) or k == (0, 0):
            bad(name, f"mode {k} outside the retained band |k_i| < {half}")

    in_band("solver.forcing", s.forcing)
    for k in cfg.output.tracked_modes:
        in_band("output.tracked_modes", k)
    if not _divisible(s.t_spin, s.dt):
        bad("solver.t_spin", f"{s.t_spin} is not an integer multiple of solver.dt={s.dt}")
    if s.backend not in ("auto", "compiled", "python"):
        bad("solver.backend", "expected auto, compiled or python")
    if o.sigma < 0:
        bad("observation.sigma", "must be non-negative")
    if not o.lam > 0:
        bad("observation.lambda", "must be a positive multiple of lambda1 or inf")
    if not o.h > 0 or not _divisible(o.h, s.dt):
        bad("observation.h", f"{o.h} is not an integer multiple of solver.dt={s.dt}")
    if o.steps < 0:
        bad("observation.steps", "must be non-negative")
    if o.units not in ("velocity", "vorticity"):
        bad("observation.units", "expected velocity or vorticity")
    if f.mode not in ("discrete", "continuous"):
        bad("filter.mode", "expected discrete or continuous")
    if f.eta < 0:
        bad("filter.eta", "must be non-negative")
    if f.ell is not None and not f.ell > 0:
        bad("filter.ell", "must be positive or auto")
    if f.init not in ("spinup", "truth", "zero"):
        bad("filter.init", "expected spinup, truth or zero")
    if c.omega < 0:
        bad("continuous.omega", "must be non-negative")
    if c.sigma0 < 0:
        bad("continuous.sigma0", "must be non-negative")
    if c.r_mode not in ("spde", "pde"):
        bad("continuous.r_mode", "expected spde or pde")
    if c.order not in ("nse_first", "ou_first"):
        bad("continuous.order", "expected nse_first or ou_first")
    cdt = cfg.continuous_dt
    if not cdt > 0:
        bad("continuous.dt", "must be positive")
    for name, t in (("continuous.T", c.T), ("continuous.record_every", c.record_every)):
        if not _divisible(t, cdt):
            bad(name, f"{t} is not an integer multiple of the split-step dt={cdt}")
    if not c.record_every > 0:
        bad("continuous.record_every", "must be positive")
    k = cfg.classify
    if not 0 < k.stay_fraction <= 1:
        bad("classify.stay_fraction", "must be in (0, 1]")
