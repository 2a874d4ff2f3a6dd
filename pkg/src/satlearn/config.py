"""Run configuration: one TOML file, strictly validated section by section.

Unknown sections or keys fail fast; every physical unit is spelled out in
the key name. CLI flags may override engine, tree method, seed, and the
output directory after loading.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .connectivity import LinkBudgetParams
from .errors import ConfigurationError
from .geometry import ConstellationSpec, GeometryConstants
from .learning import TrainConfig
from .snn import HybridActivationConfig, LifParams


@dataclass
class SamplingConfig:
    step_s: float = 60.0
    duration_s: float | None = None
    require_every_timestamp: bool = True


@dataclass
class TreeConfig:
    method: str = "optimized"  # optimized | chain | explicit-file
    file: str | None = None

    def __post_init__(self):
        if self.method not in ("optimized", "chain", "explicit-file"):
            raise ConfigurationError(f"unknown tree method {self.method!r}")
        if self.method == "explicit-file" and not self.file:
            raise ConfigurationError("tree method explicit-file needs tree.file")


@dataclass
class DatasetConfig:
    kind: str = "gaussian-blobs"  # gaussian-blobs | mini-images | quadratic-targets
    n_train: int = 600
    n_test: int = 200
    n_classes: int = 4
    n_features: int = 8
    image_size: int = 16
    dim: int = 1
    plane_spread: float = 1.0
    jitter: float = 0.0

    def __post_init__(self):
        if self.kind not in ("gaussian-blobs", "mini-images", "quadratic-targets"):
            raise ConfigurationError(f"unknown dataset kind {self.kind!r}")


@dataclass
class ModelConfig:
    hidden: tuple[int, ...] = (40,)
    conv_channels: tuple[int, ...] = (4, 8)
    kernel: int = 3
    dense_after_conv: int = 32
    timesteps: int = 3
    decay: float = 0.9
    threshold: float = 1.0
    alpha_init: float = 0.2
    mask_prob: float = 0.2

    def lif(self) -> LifParams:
        return LifParams(decay=self.decay, threshold=self.threshold, timesteps=self.timesteps)

    def hybrid(self, seed: int) -> HybridActivationConfig:
        return HybridActivationConfig(
            alpha_init=self.alpha_init, mask_prob=self.mask_prob, seed=seed
        )


@dataclass
class RunConfig:
    constellation: ConstellationSpec
    link: LinkBudgetParams
    constants: GeometryConstants = field(default_factory=GeometryConstants)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    tree: TreeConfig = field(default_factory=TreeConfig)
    train: TrainConfig = field(default_factory=lambda: TrainConfig(learning_rate=0.05))
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    output_dir: str = "runs/out"

    def config_hash(self) -> str:
        blob = json.dumps(_as_jsonable(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _as_jsonable(obj):
    if hasattr(obj, "__dataclass_fields__"):
        return {k: _as_jsonable(getattr(obj, k)) for k in obj.__dataclass_fields__}
    if isinstance(obj, (list, tuple)):
        return [_as_jsonable(v) for v in obj]
    return obj


_SECTION_KEYS = {
    "constellation": {
        "total_satellites", "planes", "phasing", "inclination_deg", "altitude_km", "pattern",
    },
    "link": {
        "carrier_frequency_hz", "eirpg_dbw", "bandwidth_hz", "max_doppler_hz",
        "noise_temperature_k", "boltzmann_j_per_k",
    },
    "geometry": {"earth_radius_km", "mu_km3_s2", "light_speed_km_s"},
    "sampling": {"step_s", "duration_s", "require_every_timestamp"},
    "tree": {"method", "file"},
    "train": {
        "learning_rate", "local_epochs", "intra_rounds", "iterations", "engine", "model",
        "heterogeneity", "batch_size", "seed", "round_budget", "checkpoint_every",
        "analyze_mixing", "grad_metric",
    },
    "dataset": {
        "kind", "n_train", "n_test", "n_classes", "n_features", "image_size",
        "dim", "plane_spread", "jitter",
    },
    "model": {
        "hidden", "conv_channels", "kernel", "dense_after_conv", "timesteps",
        "decay", "threshold", "alpha_init", "mask_prob",
    },
    "output": {"directory"},
}

_REQUIRED_SECTIONS = ("constellation", "link")


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"invalid TOML in {path}: {exc}") from exc

    unknown_sections = set(raw) - set(_SECTION_KEYS)
    if unknown_sections:
        raise ConfigurationError(f"unknown config sections: {sorted(unknown_sections)}")
    for name, table in raw.items():
        if not isinstance(table, dict):
            raise ConfigurationError(f"section [{name}] must be a table")
        unknown = set(table) - _SECTION_KEYS[name]
        if unknown:
            raise ConfigurationError(f"unknown keys in [{name}]: {sorted(unknown)}")
    for name in _REQUIRED_SECTIONS:
        if name not in raw:
            raise ConfigurationError(f"missing required section [{name}]")

    try:
        constellation = ConstellationSpec(**raw["constellation"])
        link = LinkBudgetParams(**raw["link"])
        constants = GeometryConstants(**raw.get("geometry", {}))
        sampling = SamplingConfig(**raw.get("sampling", {}))
        tree = TreeConfig(**raw.get("tree", {}))
        train = TrainConfig(**{"learning_rate": 0.05, **raw.get("train", {})})
        dataset = DatasetConfig(**raw.get("dataset", {}))
        model_raw = dict(raw.get("model", {}))
        for key in ("hidden", "conv_channels"):
            if key in model_raw:
                model_raw[key] = tuple(model_raw[key])
        model = ModelConfig(**model_raw)
        output_dir = raw.get("output", {}).get("directory", "runs/out")
    except TypeError as exc:
        raise ConfigurationError(f"bad config value: {exc}") from exc

    if tree.method == "explicit-file":
        tree_file = Path(tree.file)
        if not tree_file.is_absolute():
            tree_file = path.parent / tree_file
        if not tree_file.exists():
            raise ConfigurationError(f"tree file not found: {tree_file}")
        tree = TreeConfig(method=tree.method, file=str(tree_file))

    return RunConfig(
        constellation=constellation,
        link=link,
        constants=constants,
        sampling=sampling,
        tree=tree,
        train=train,
        dataset=dataset,
        model=model,
        output_dir=output_dir,
    )
