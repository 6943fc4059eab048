"""Declarative run configuration and its flat ``key = value`` text format."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields

from .curves import TimeGrid
from .model import (
    DEFAULT_EPS,
    DecoherenceConfig,
    FieldState,
    PhysicalParams,
    RepresentationConfig,
    gph_from_khz_over_pi,
)

DEFAULT_GPH_KHZ_OVER_PI = 47.0


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    rep: str = "irreducible"
    n_osc: int | None = None
    z_renorm: float = 1.0
    chi_p: float = 1.0
    state: str = "vacuum"
    nbar: float = 0.0
    z_amp: float = 0.0
    gph_khz_over_pi: float = DEFAULT_GPH_KHZ_OVER_PI
    delta: float = 0.0
    p_plus0: float = 1.0
    kappa: float = 0.0
    t_cav_us: float | None = None
    dt_us: float = 0.0
    dt_fraction: float | None = None
    t_min_us: float = 0.0
    t_max_us: float = 90.0
    points: int = 91
    open_start: bool = False
    eps: float = DEFAULT_EPS
    weights: str = "binomial"

    def __post_init__(self):
        if self.rep not in ("irreducible", "reducible"):
            raise ConfigError(f"rep must be irreducible or reducible, got {self.rep!r}")
        if self.state not in ("vacuum", "thermal", "coherent"):
            raise ConfigError(f"unknown field state {self.state!r}")
        if self.rep == "reducible" and self.n_osc is None:
            raise ConfigError("reducible representation needs N")
        if self.weights not in ("binomial", "gaussian", "gaussian_small_z"):
            raise ConfigError(f"unknown weights {self.weights!r}")

    # -- domain objects ---------------------------------------------------
    def representation(self) -> RepresentationConfig:
        if self.rep == "reducible":
            return RepresentationConfig.reducible(self.n_osc, self.z_renorm, self.chi_p)
        return RepresentationConfig.irreducible(self.chi_p, self.z_renorm)

    def field_state(self) -> FieldState:
        if self.state == "thermal":
            return FieldState.thermal(self.nbar)
        if self.state == "coherent":
            return FieldState.coherent(self.z_amp)
        return FieldState.vacuum()

    def physical(self) -> PhysicalParams:
        return PhysicalParams(gph_from_khz_over_pi(self.gph_khz_over_pi), self.delta,
                              self.p_plus0)

    def decoherence(self) -> DecoherenceConfig:
        if self.t_cav_us is not None:
            return DecoherenceConfig.from_cavity_lifetime(self.t_cav_us, self.dt_us,
                                                          self.dt_fraction)
        return DecoherenceConfig(self.kappa, self.dt_us, self.dt_fraction)

    def grid(self) -> TimeGrid:
        return TimeGrid(self.t_max_us, self.points, self.t_min_us, self.open_start)

    # -- text format ------------------------------------------------------
    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            lines.append(f"{f.name} = {_format(v)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> RunConfig:
        kinds = {f.name: f.type for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if not sep or key not in kinds:
                raise ConfigError(f"config line {lineno}: unknown or malformed entry {raw!r}")
            values[key] = _parse(kinds[key], val, lineno)
        return cls(**values)

    def replace(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes)


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(kind: str, val: str, lineno: int):
    try:
        if "bool" in kind:
            if val.lower() not in ("true", "false"):
                raise ValueError(val)
            return val.lower() == "true"
        if "int" in kind:
            return int(val)
        if "float" in kind:
            x = float(val)
            if math.isnan(x):
                raise ValueError(val)
            return x
        return val
    except ValueError:
        raise ConfigError(f"config line {lineno}: bad value {val!r} for {kind}") from None
