"""Run configuration: JSON-backed, schema-checked, flag-overridable.

Every section is a frozen dataclass; unknown keys anywhere in the file
are rejected rather than ignored, so typos fail loudly. Overrides use
dotted paths ("cv.folds=5") and win over file values.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .lattice import BasisSpec, LatticeGrid, build_lattice
from .simulate import PriorConfig

VARIANTS = ("stationary", "nonstationary", "nonstationary_adjusted")


@dataclass(frozen=True)
class DomainConfig:
    bounds: tuple = (0.0, 1.0, 0.0, 1.0)  # xmin, xmax, ymin, ymax

    def __post_init__(self):
        b = tuple(float(v) for v in self.bounds)
        if len(b) != 4 or not (b[1] > b[0] and b[3] > b[2]):
            raise ValidationError(f"domain bounds must be (xmin<xmax, ymin<ymax), got {self.bounds}")
        object.__setattr__(self, "bounds", b)


@dataclass(frozen=True)
class LatticeConfig:
    nx: int = 64
    ny: int = 64
    buffer: int = 0


@dataclass(frozen=True)
class BasisConfig:
    support_multiple: float = 2.5
    normalize: bool = False


@dataclass(frozen=True)
class WindowConfig:
    before: int = 15
    after: int = 14

    def __post_init__(self):
        if self.before < 0 or self.after < 0:
            raise ValidationError("window sizes must be non-negative")


@dataclass(frozen=True)
class StationFilterConfig:
    min_active: int = 250
    max_value: float = 80.0
    background_only: bool = True


@dataclass(frozen=True)
class CvConfig:
    folds: int = 10

    def __post_init__(self):
        if self.folds < 2:
            raise ValidationError(f"cv.folds must be >= 2, got {self.folds}")


@dataclass(frozen=True)
class CondsimConfig:
    n_draws: int = 1000

    def __post_init__(self):
        if self.n_draws < 1:
            raise ValidationError(f"condsim.n_draws must be >= 1, got {self.n_draws}")


@dataclass(frozen=True)
class SeedConfig:
    master: int = 0


@dataclass(frozen=True)
class TrainConfig:
    n_pairs: int = 20000
    r: int = 30


@dataclass(frozen=True)
class PathsConfig:
    """File locations; empty strings mean "not provided"."""

    stations: str = ""
    values: str = ""
    params: str = ""
    mask: str = ""
    covariates: str = ""
    residuals: str = ""
    out_dir: str = "."


@dataclass(frozen=True)
class RunConfig:
    domain: DomainConfig = field(default_factory=DomainConfig)
    lattice: LatticeConfig = field(default_factory=LatticeConfig)
    basis: BasisConfig = field(default_factory=BasisConfig)
    prior: PriorConfig = field(default_factory=PriorConfig)
    windows: WindowConfig = field(default_factory=WindowConfig)
    stations: StationFilterConfig = field(default_factory=StationFilterConfig)
    cv: CvConfig = field(default_factory=CvConfig)
    condsim: CondsimConfig = field(default_factory=CondsimConfig)
    seeds: SeedConfig = field(default_factory=SeedConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    variant: str = "nonstationary_adjusted"
    picp_intervals: str = "gaussian"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValidationError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.picp_intervals not in ("gaussian", "ensemble"):
            raise ValidationError(f"picp_intervals must be gaussian or ensemble, got {self.picp_intervals!r}")

    def build_grid(self) -> LatticeGrid:
        return build_lattice(self.domain.bounds, self.lattice.nx, self.lattice.ny, self.lattice.buffer)

    def build_spec(self) -> BasisSpec:
        return BasisSpec(support_multiple=self.basis.support_multiple, normalize=self.basis.normalize)


_SECTIONS = {
    "domain": DomainConfig,
    "lattice": LatticeConfig,
    "basis": BasisConfig,
    "prior": PriorConfig,
    "windows": WindowConfig,
    "stations": StationFilterConfig,
    "cv": CvConfig,
    "condsim": CondsimConfig,
    "seeds": SeedConfig,
    "train": TrainConfig,
    "paths": PathsConfig,
}
_SCALARS = ("variant", "picp_intervals")


def _build_section(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ValidationError(f"section {where!r} must be an object, got {type(data).__name__}")
    names = [f.name for f in dataclasses.fields(cls)]
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ValidationError(f"unknown keys {unknown} in section {where!r} (known: {names})")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        v = data[f.name]
        if isinstance(v, list):
            v = tuple(v)
        kwargs[f.name] = v
    return cls(**kwargs)


def config_from_dict(data: dict) -> RunConfig:
    """Construct a validated RunConfig, rejecting unknown keys at every level."""
    if not isinstance(data, dict):
        raise ValidationError(f"config root must be an object, got {type(data).__name__}")
    unknown = sorted(set(data) - set(_SECTIONS) - set(_SCALARS))
    if unknown:
        raise ValidationError(f"unknown top-level config keys {unknown}")
    kwargs = {
        name: _build_section(cls, data.get(name, {}), name) for name, cls in _SECTIONS.items()
    }
    for name in _SCALARS:
        if name in data:
            kwargs[name] = data[name]
    return RunConfig(**kwargs)


def config_to_dict(cfg: RunConfig) -> dict:
    """Plain-JSON form of a config (tuples become lists)."""

    def plain(x):
        if dataclasses.is_dataclass(x):
            return {f.name: plain(getattr(x, f.name)) for f in dataclasses.fields(x)}
        if isinstance(x, tuple):
            return [plain(v) for v in x]
        if isinstance(x, (np.floating, np.integer)):
            return x.item()
        return x

    return plain(cfg)


def apply_overrides(data: dict, sets: list) -> dict:
    """Apply "sec.key=value" overrides onto a raw config dict (flags win).

    Values parse as JSON when possible, else as strings.
    """
    for item in sets or []:
        if "=" not in item:
            raise ValidationError(f"override {item!r} is not of the form path=value")
        path, raw = item.split("=", 1)
        keys = path.strip().split(".")
        if not all(keys):
            raise ValidationError(f"override {item!r} has an empty path component")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = data
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ValidationError(f"override {item!r} descends through a non-object")
        node[keys[-1]] = value
    return data


def load_config(path=None, sets: list | None = None) -> RunConfig:
    """Load a config JSON (or start from defaults) and apply overrides."""
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    else:
        data = {}
    return config_from_dict(apply_overrides(data, sets or []))
