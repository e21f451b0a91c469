"""Run configuration: one JSON file with flat per-module sections.

Every numeric field has a documented range; unknown keys are rejected and
validation messages name the offending field (``section.key``).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from .errors import ConfigError
from .rng import U64_MAX
from .system import lookup

SIDES = ("cu", "cs")


def _check(section, name, value, lo=None, hi=None, kind=(int, float), optional=False):
    where = f"{section}.{name}"
    if value is None:
        if optional:
            return
        raise ConfigError(f"{where}: value required")
    if isinstance(value, bool) or not isinstance(value, kind):
        raise ConfigError(f"{where}: expected {getattr(kind, '__name__', 'number')}, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(f"{where}: must be >= {lo} (got {value!r})")
    if hi is not None and value > hi:
        raise ConfigError(f"{where}: must be <= {hi} (got {value!r})")


class _Section:
    """Mixin: construction from a dict with unknown-key rejection."""

    NAME = ""

    @classmethod
    def from_dict(cls, data):
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(f"{cls.NAME}: expected an object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"{cls.NAME}: unknown keys {unknown}")
        obj = cls(**data)
        obj.validate()
        return obj

    def validate(self):  # pragma: no cover - overridden
        pass


@dataclass
class SystemSection(_Section):
    NAME = "system"
    id: str = "cat2"
    params: dict = field(default_factory=dict)

    def validate(self):
        if not isinstance(self.id, str):
            raise ConfigError("system.id: expected a string")
        try:
            entry = lookup(self.id)
        except KeyError as exc:
            raise ConfigError(f"system.id: {exc}") from None
        if not isinstance(self.params, dict):
            raise ConfigError("system.params: expected an object")
        unknown = sorted(set(self.params) - set(entry.defaults))
        if unknown:
            raise ConfigError(f"system.params: unknown parameters {unknown} for {self.id}")
        for k, v in self.params.items():
            _check("system.params", k, v)


@dataclass
class SplittingSection(_Section):
    NAME = "splitting"
    points: int = 64
    burn_in: int = 100
    iters: int = 200
    tol: float = 1e-9
    domination_horizon: int = 20

    def validate(self):
        _check(self.NAME, "points", self.points, 1, 10**6, int)
        _check(self.NAME, "burn_in", self.burn_in, 0, 10**5, int)
        _check(self.NAME, "iters", self.iters, 2, 10**5, int)
        _check(self.NAME, "tol", self.tol, 1e-15, 1.0)
        _check(self.NAME, "domination_horizon", self.domination_horizon, 3, 10**4, int)


@dataclass
class LyapunovSection(_Section):
    NAME = "lyapunov"
    horizon: int = 1000
    points: int = 64
    margin_threshold: float = 0.05

    def validate(self):
        _check(self.NAME, "horizon", self.horizon, 1, 10**6, int)
        _check(self.NAME, "points", self.points, 1, 10**6, int)
        _check(self.NAME, "margin_threshold", self.margin_threshold, 0.0, 10.0)


@dataclass
class InflatabilitySection(_Section):
    NAME = "inflatability"
    horizon: int = 10
    samples: int = 10_000
    grid: int | None = None
    sides: list = field(default_factory=lambda: ["cu", "cs"])

    def validate(self):
        _check(self.NAME, "horizon", self.horizon, 0, 10**4, int)
        _check(self.NAME, "samples", self.samples, 100, 10**7, int)
        _check(self.NAME, "grid", self.grid, 2, 1024, int, optional=True)
        if not isinstance(self.sides, list) or not self.sides or \
                any(s not in SIDES for s in self.sides):
            raise ConfigError(f"inflatability.sides: expected a non-empty subset of {list(SIDES)}")


@dataclass
class DiskGrowthSection(_Section):
    NAME = "diskgrowth"
    basepoint: list | None = None
    r0: float = 0.01
    resolution: float | None = None
    steps: int = 12
    delta: float = 0.05
    h: float = 0.5
    h_max: float = 0.05
    span_samples: int = 200
    chart_cap: float = 0.4
    max_vertices: int = 10**7

    def validate(self):
        n = self.NAME
        if self.basepoint is not None and (not isinstance(self.basepoint, list) or
                                           any(isinstance(c, bool) or not isinstance(c, (int, float))
                                               for c in self.basepoint)):
            raise ConfigError(f"{n}.basepoint: expected a list of numbers")
        _check(n, "r0", self.r0, 1e-15, 0.05)
        _check(n, "resolution", self.resolution, 1e-15, 0.05, optional=True)
        _check(n, "steps", self.steps, 0, 200, int)
        _check(n, "delta", self.delta, 1e-12, 10.0)
        _check(n, "h", self.h, 1e-12, 1e12)
        _check(n, "h_max", self.h_max, 1e-6, 1.0)
        _check(n, "span_samples", self.span_samples, 1, 10**6, int)
        _check(n, "chart_cap", self.chart_cap, 1e-6, 0.4)
        _check(n, "max_vertices", self.max_vertices, 10, 10**7, int)


@dataclass
class HopfSection(_Section):
    NAME = "hopf"
    points: int = 100
    horizon: int = 100_000
    radius: float = 0.1
    pair_points: int = 4
    pairs_per_point: int = 4
    t_scale: float = 1e-3
    horizon_conv: int = 15
    tolerance: float = 5e-2

    def validate(self):
        n = self.NAME
        _check(n, "points", self.points, 1, 10**5, int)
        _check(n, "horizon", self.horizon, 1000, 10**6, int)
        _check(n, "radius", self.radius, 0.0, 4.0)
        _check(n, "pair_points", self.pair_points, 0, 10**4, int)
        _check(n, "pairs_per_point", self.pairs_per_point, 1, 1000, int)
        _check(n, "t_scale", self.t_scale, 1e-12, 1e-2)
        _check(n, "horizon_conv", self.horizon_conv, 2, 100, int)
        _check(n, "tolerance", self.tolerance, 0.0, 2.0)


@dataclass
class ProductStructureSection(_Section):
    NAME = "productstructure"
    grid: int | None = None
    K_span: float = 0.4
    trials: int = 1000
    separation: float | None = None
    safety_margin: float = 0.01

    def validate(self):
        n = self.NAME
        _check(n, "grid", self.grid, 2, 1024, int, optional=True)
        _check(n, "K_span", self.K_span, 1e-9, 0.4)
        _check(n, "trials", self.trials, 1, 10**7, int)
        _check(n, "separation", self.separation, 0.0, 0.5, optional=True)
        _check(n, "safety_margin", self.safety_margin, 0.0, 1.0)


@dataclass
class SweepSection(_Section):
    NAME = "sweep"
    family: str = "cat2shear"
    parameter: str = "eps"
    values: list = field(default_factory=lambda: [0.0, 0.005, 0.01, 0.015, 0.02])
    side: str = "cu"
    horizon: int = 10
    samples: int = 2000
    grid: int | None = None

    def validate(self):
        n = self.NAME
        try:
            entry = lookup(self.family)
        except KeyError as exc:
            raise ConfigError(f"{n}.family: {exc}") from None
        if self.parameter not in entry.defaults:
            raise ConfigError(f"{n}.parameter: {self.family} has no parameter {self.parameter!r}")
        if not isinstance(self.values, list) or not self.values:
            raise ConfigError(f"{n}.values: expected a non-empty list")
        for i, v in enumerate(self.values):
            _check(n, f"values[{i}]", v, -10.0, 10.0)
        if self.side not in SIDES:
            raise ConfigError(f"{n}.side: expected one of {list(SIDES)}")
        _check(n, "horizon", self.horizon, 0, 10**4, int)
        _check(n, "samples", self.samples, 100, 10**7, int)
        _check(n, "grid", self.grid, 2, 1024, int, optional=True)


_SECTIONS = {
    "system": SystemSection,
    "splitting": SplittingSection,
    "lyapunov": LyapunovSection,
    "inflatability": InflatabilitySection,
    "diskgrowth": DiskGrowthSection,
    "hopf": HopfSection,
    "productstructure": ProductStructureSection,
    "sweep": SweepSection,
}


@dataclass
class RunConfig:
    system: SystemSection = field(default_factory=SystemSection)
    seed: int = 0
    out: str = "domlab-out"
    threads: int | None = None
    splitting: SplittingSection = field(default_factory=SplittingSection)
    lyapunov: LyapunovSection = field(default_factory=LyapunovSection)
    inflatability: InflatabilitySection = field(default_factory=InflatabilitySection)
    diskgrowth: DiskGrowthSection = field(default_factory=DiskGrowthSection)
    hopf: HopfSection = field(default_factory=HopfSection)
    productstructure: ProductStructureSection = field(default_factory=ProductStructureSection)
    sweep: SweepSection = field(default_factory=SweepSection)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config: expected a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"config: unknown keys {unknown}")
        kw = {name: sec.from_dict(data.get(name)) for name, sec in _SECTIONS.items()}
        cfg = cls(**kw, seed=data.get("seed", 0), out=data.get("out", "domlab-out"),
                  threads=data.get("threads"))
        cfg.validate()
        return cfg

    def validate(self):
        _check("config", "seed", self.seed, 0, U64_MAX, int)
        _check("config", "threads", self.threads, 1, 4096, int, optional=True)
        if not isinstance(self.out, str) or not self.out:
            raise ConfigError("config.out: expected a non-empty path")
        for name in _SECTIONS:
            getattr(self, name).validate()

    def to_dict(self):
        return asdict(self)

    def echo(self):
        """Config as stored in reports (the output directory is left out)."""
        d = self.to_dict()
        d.pop("out")
        d.pop("threads")
        return d


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig.from_dict({})
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return RunConfig.from_dict(data)
