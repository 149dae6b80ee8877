"""Run configuration: one TOML file, environment and command-line overrides.

Example::

    seed = 7

    [paths]
    properties = "data/properties.csv"
    boundaries = "data/boundaries.jsonl"
    text_embeddings = "data/text_embeddings.jsonl"
    mask_embeddings = "data/mask_embeddings.jsonl"
    replacement_embeddings = "data/replacement_embeddings.jsonl"
    output_dir = "out"

    [model]
    h = 768

    [bands.thresholds]
    A = 92
"""

import dataclasses
import hashlib
import json
import os
import tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .datahub.bands import BandTable
from .errors import InvalidConfig, MissingFile

SEED_ENV = 'EPCFUSION_SEED'
MODALITIES = ('tab', 'text', 'spatial')


@dataclass(frozen=True)
class PathsConfig:
    properties: Path = Path('properties.csv')
    boundaries: Path = Path('boundaries.jsonl')
    text_embeddings: Path = Path('text_embeddings.jsonl')
    mask_embeddings: Path = Path('mask_embeddings.jsonl')
    replacement_embeddings: Path = Path('replacement_embeddings.jsonl')
    output_dir: Path = Path('out')

    def require(self, *names: str):
        """Raise :class:`MissingFile` unless every named input exists."""
        for name in names:
            path = getattr(self, name)
            if not Path(path).exists():
                raise MissingFile(f"{name} file not found: {path}", path=path)


@dataclass(frozen=True)
class ModelConfig:
    d: int = 128
    e: int = 64
    h: int = 768
    L: int = 128
    numeric_mlp: tuple[int, ...] = (128, 64)
    spatial_numeric_mlp: tuple[int, ...] = (64, 32)
    gate_hidden: int = 128
    fusion_mlp: tuple[int, ...] = (256, 128)
    dropout: float = 0.1
    n_bands: int = 7
    conv_kernel: int = 3
    modalities: tuple[str, ...] = MODALITIES

    def __post_init__(self):
        dims = [self.d, self.e, self.h, self.L, self.gate_hidden, self.n_bands, self.conv_kernel,
                *self.numeric_mlp, *self.spatial_numeric_mlp, *self.fusion_mlp]
        if any(int(v) <= 0 for v in dims):
            raise InvalidConfig("model dimensions must be positive")
        if not self.fusion_mlp or self.fusion_mlp[-1] != self.d:
            raise InvalidConfig("fusion_mlp must end at the unified dimension d")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidConfig("dropout must lie in [0, 1)")
        if self.conv_kernel % 2 != 1:
            raise InvalidConfig("conv_kernel must be odd")
        if not self.modalities:
            raise InvalidConfig("at least one modality is required")
        unknown = set(self.modalities) - set(MODALITIES)
        if unknown:
            raise InvalidConfig(f"unknown modalities {sorted(unknown)}")
        # Canonical order: (tab, text, spatial).
        object.__setattr__(self, 'modalities', tuple(m for m in MODALITIES if m in self.modalities))


@dataclass(frozen=True)
class LossConfig:
    delta: float = 1.0
    w_sap: float = 0.1
    w_ei: float = 0.1

    def __post_init__(self):
        if self.delta <= 0:
            raise InvalidConfig("huber delta must be positive")
        if self.w_sap < 0 or self.w_ei < 0:
            raise InvalidConfig("auxiliary band weights must be non-negative")


@dataclass(frozen=True)
class OptimConfig:
    lr: float = 1e-3
    projection_lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float = 1.0
    batch_size: int = 128
    max_epochs: int = 50
    early_stop_patience: int = 10
    plateau_patience: int = 5
    plateau_factor: float = 0.5

    def __post_init__(self):
        if self.lr <= 0 or self.projection_lr <= 0:
            raise InvalidConfig("learning rates must be positive")
        if self.batch_size <= 0 or self.max_epochs <= 0:
            raise InvalidConfig("batch_size and max_epochs must be positive")
        if not 0 < self.plateau_factor < 1:
            raise InvalidConfig("plateau_factor must lie in (0, 1)")


@dataclass(frozen=True)
class SplitConfig:
    train: float = 0.7
    val: float = 0.15
    test: float = 0.15

    def __post_init__(self):
        if min(self.train, self.val, self.test) < 0 or abs(self.train + self.val + self.test - 1.0) > 1e-9:
            raise InvalidConfig("split ratios must be non-negative and sum to 1")


@dataclass(frozen=True)
class ExplainConfig:
    background: int = 32
    shapley_samples: int = 256
    histogram_bin: float = 0.02
    min_group_size: int = 30
    saliency_samples: int = 3

    def __post_init__(self):
        if self.background < 1:
            raise InvalidConfig("the Shapley background needs at least one row")


@dataclass(frozen=True)
class ParallelConfig:
    workers: int = 1
    multi_process: bool = False


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    paths: PathsConfig = field(default_factory=PathsConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    bands: BandTable = field(default_factory=BandTable)
    explain: ExplainConfig = field(default_factory=ExplainConfig)
    parallel: ParallelConfig = field(default_factory=ParallelConfig)

    def __post_init__(self):
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise InvalidConfig(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")

    @classmethod
    def load(cls, path: str | Path | None = None) -> "RunConfig":
        """Read a TOML file (or take defaults when *path* is None), then apply
        the ``EPCFUSION_SEED`` environment override."""
        data: dict[str, Any] = {}
        base = Path.cwd()
        if path is not None:
            path = Path(path)
            if not path.exists():
                raise InvalidConfig(f"config file not found: {path}")
            try:
                data = tomllib.loads(path.read_text(encoding='utf-8'))
            except tomllib.TOMLDecodeError as e:
                raise InvalidConfig(f"cannot parse {path}: {e}") from e
            base = path.parent
        config = cls.from_dict(data, base=base)
        env_seed = os.environ.get(SEED_ENV)
        if env_seed is not None:
            try:
                config = config.with_overrides(seed=int(env_seed))
            except ValueError as e:
                raise InvalidConfig(f"{SEED_ENV} must be an integer, got {env_seed!r}") from e
        return config

    @classmethod
    def from_dict(cls, data: dict[str, Any], base: Path | None = None) -> "RunConfig":
        data = dict(data)
        sections = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(data) - set(sections)
        if unknown:
            raise InvalidConfig(f"unknown config keys {sorted(unknown)}")
        kwargs: dict[str, Any] = {}
        if 'seed' in data:
            kwargs['seed'] = data['seed']
        for name, section_type in (('paths', PathsConfig), ('model', ModelConfig), ('loss', LossConfig),
                                   ('optim', OptimConfig), ('split', SplitConfig),
                                   ('explain', ExplainConfig), ('parallel', ParallelConfig)):
            if name in data:
                kwargs[name] = _build_section(section_type, data[name], name)
        if 'paths' in kwargs and base is not None:
            kwargs['paths'] = dataclasses.replace(kwargs['paths'], **{
                f.name: _resolve(base, getattr(kwargs['paths'], f.name))
                for f in dataclasses.fields(PathsConfig)})
        if 'bands' in data:
            bands = dict(data['bands'])
            extra = set(bands) - {'thresholds', 'merge_map'}
            if extra:
                raise InvalidConfig(f"unknown keys in [bands]: {sorted(extra)}")
            kwargs['bands'] = BandTable.from_mapping(bands.get('thresholds'), bands.get('merge_map'))
        return cls(**kwargs)

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Copy with top-level fields or dotted section fields replaced,
        e.g. ``with_overrides(seed=7, **{'optim.max_epochs': 5})``.
        ``None`` values are ignored, so unset CLI flags can be passed through."""
        config = self
        for key, value in overrides.items():
            if value is None:
                continue
            if '.' in key:
                section, name = key.split('.', 1)
                current = getattr(config, section)
                config = dataclasses.replace(config, **{section: dataclasses.replace(current, **{name: value})})
            else:
                config = dataclasses.replace(config, **{key: value})
        return config

    def to_dict(self) -> dict[str, Any]:
        payload = {'seed': self.seed}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name == 'seed':
                continue
            if isinstance(value, BandTable):
                payload[f.name] = value.to_dict()
            else:
                payload[f.name] = {k: (str(v) if isinstance(v, Path) else list(v) if isinstance(v, tuple) else v)
                                   for k, v in dataclasses.asdict(value).items()}
        return payload

    def hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def _build_section(section_type, values: Any, name: str):
    if not isinstance(values, dict):
        raise InvalidConfig(f"[{name}] must be a table")
    known = {f.name: f for f in dataclasses.fields(section_type)}
    unknown = set(values) - set(known)
    if unknown:
        raise InvalidConfig(f"unknown keys in [{name}]: {sorted(unknown)}")
    kwargs = {}
    for key, value in values.items():
        if isinstance(value, list):
            value = tuple(value)
        if section_type is PathsConfig:
            value = Path(value)
        kwargs[key] = value
    try:
        return section_type(**kwargs)
    except TypeError as e:
        raise InvalidConfig(f"bad value in [{name}]: {e}") from e


def _resolve(base: Path, path: Path) -> Path:
    return path if path.is_absolute() else (base / path)
