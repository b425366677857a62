"""Declarative run configuration: one YAML tree plus flag overrides.

The file anchors a reproducible run; command-line flags win over file
values. Only client credentials come from the environment.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import yaml

from .model import TrainConfig


@dataclass
class DataConfig:
    interactions: str = ""
    catalog: str = ""


@dataclass
class SplitConfig:
    ratios: tuple = (0.8, 0.1, 0.1)
    seed: int = 0


@dataclass
class PopularityConfig:
    hot_frac: float = 0.2
    cold_frac: float = 0.2


@dataclass
class PerConfig:
    """Preference reweighting settings; alpha = 0 disables the module
    (every preference weight is 0, the algorithm-mode limit)."""

    alpha: float = 0.05
    quantile_mode: str = "algorithm"
    half_exponent: bool = False
    normalization: str = "per_game"
    min_times: int = 3


@dataclass
class PenrConfig:
    edge_hot: float = 5.0
    node_hot: float = 0.2
    node_cold: float = 6.0


@dataclass
class PrgConfig:
    mode: str = "stub"  # off | stub | live
    cache: Optional[str] = None
    generation_endpoint: Optional[str] = None
    embedding_endpoint: Optional[str] = None
    model: str = ""
    timeout: float = 30.0
    retries: int = 2
    max_in_flight: int = 1


@dataclass
class EvalConfig:
    k_values: tuple = (5, 10)


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    popularity: PopularityConfig = field(default_factory=PopularityConfig)
    per: PerConfig = field(default_factory=PerConfig)
    penr: PenrConfig = field(default_factory=PenrConfig)
    prg: PrgConfig = field(default_factory=PrgConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    out_dir: str = "out"

    def validate(self, need_data: bool = True, need_catalog: bool = True):
        if need_data:
            if not self.data.interactions or not Path(self.data.interactions).exists():
                raise ValueError(f"interactions path not found: {self.data.interactions!r}")
        if need_catalog:
            if not self.data.catalog or not Path(self.data.catalog).exists():
                raise ValueError(f"catalog path not found: {self.data.catalog!r}")
        if len(self.split.ratios) != 3 or abs(sum(self.split.ratios) - 1.0) > 1e-9:
            raise ValueError(f"split ratios must be three values summing to 1, got {self.split.ratios}")
        if not 0.0 <= self.per.alpha < 0.5:
            raise ValueError(f"per.alpha must lie in [0, 0.5), got {self.per.alpha}")
        if self.prg.mode not in ("off", "stub", "live"):
            raise ValueError(f"prg.mode must be off/stub/live, got {self.prg.mode!r}")
        if self.prg.mode == "live" and not (self.prg.generation_endpoint and self.prg.embedding_endpoint):
            raise ValueError("live prg mode needs generation_endpoint and embedding_endpoint")
        if any(k < 1 for k in self.eval.k_values):
            raise ValueError(f"eval K values must be >= 1, got {self.eval.k_values}")
        self.train.validate()


def _fill(dc_type, raw: dict, where: str):
    known = {f.name for f in fields(dc_type)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys under {where}: {sorted(unknown)}")
    kwargs = {}
    for f in fields(dc_type):
        if f.name in raw and raw[f.name] is not None:
            value = raw[f.name]
            if f.name in ("ratios", "k_values"):
                value = tuple(value)
            kwargs[f.name] = value
    return dc_type(**kwargs)


_SECTIONS = {
    "data": DataConfig,
    "split": SplitConfig,
    "popularity": PopularityConfig,
    "per": PerConfig,
    "penr": PenrConfig,
    "prg": PrgConfig,
    "train": TrainConfig,
    "eval": EvalConfig,
}


def config_from_dict(raw: dict) -> RunConfig:
    raw = dict(raw or {})
    out_dir = raw.pop("out_dir", "out")
    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        raise ValueError(f"unknown top-level config keys: {sorted(unknown)}")
    parts = {name: _fill(typ, raw.get(name) or {}, name) for name, typ in _SECTIONS.items()}
    return RunConfig(out_dir=out_dir, **parts)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ValueError(f"{path} must contain a mapping at the top level")
    return config_from_dict(raw)
