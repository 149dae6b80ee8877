"""Gated multimodal fusion model, its ablated variants and persistence."""

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..config import MODALITIES, ModelConfig
from ..datahub.features import FeatureBatch, Preprocessor
from ..datahub.scaler import TargetScaler
from ..datahub.records import TARGETS
from ..diffcore import functional as F
from ..diffcore.checkpoint import load_checkpoint, save_checkpoint
from ..diffcore.layers import MLP, Dense, DropoutStream, Module
from ..diffcore.optim import ParamGroup
from ..diffcore.tensor import Tensor, no_grad
from ..errors import InvalidConfig, SchemaMismatch
from .encoders import SpatialEncoder, TabularEncoder, TextEncoder

TEXT_PROJECTION_GROUP = 'text_projection'


@dataclass
class FusionOutput:
    latents: dict[str, Tensor]   # modality -> (B, d)
    alpha: Tensor                # (B, M), rows on the simplex
    z_fuse: Tensor               # (B, d)
    y_hat: Tensor                # (B, 2), normalized scale
    band_logits: Tensor          # (B, 2, n_bands)


class Gate(Module):
    """Two-layer MLP from the concatenated latents to one logit per modality."""

    def __init__(self, n_in: int, hidden: int, n_modalities: int, rng: np.random.Generator):
        self.hidden = Dense(n_in, hidden, rng)
        self.logits = Dense(hidden, n_modalities, rng)

    def forward(self, z: Tensor) -> Tensor:
        return F.softmax(self.logits(F.relu(self.hidden(z))), axis=-1)


class FusionModel(Module):
    """Encoders for the configured modalities, a sample-wise softmax gate,
    the fusion MLP and the regression and band heads. A single-modality
    model has no gate (alpha is identically 1)."""

    def __init__(self, config: ModelConfig, vocab_sizes: list[int], seed: int = 0):
        self.config = config
        self.vocab_sizes = list(vocab_sizes)
        self.seed = seed
        self.modalities = config.modalities
        rng = np.random.default_rng(seed)
        self.stream = DropoutStream(seed)
        m = len(self.modalities)
        if 'tab' in self.modalities:
            self.tabular = TabularEncoder(config, vocab_sizes, self.stream, rng)
        if 'text' in self.modalities:
            self.text = TextEncoder(config, self.stream, rng)
        if 'spatial' in self.modalities:
            self.spatial = SpatialEncoder(config, self.stream, rng)
        self.gate = Gate(m * config.d, config.gate_hidden, m, rng) if m > 1 else None
        self.fusion = MLP(m * config.d, config.fusion_mlp, config.dropout, self.stream, rng)
        self.regression = Dense(config.d, len(TARGETS), rng)
        self.bands = Dense(config.d, len(TARGETS) * config.n_bands, rng)

    # encoders ---------------------------------------------------------------
    def encode_tabular(self, batch: FeatureBatch) -> Tensor:
        return self.tabular(batch.cat_idx, batch.numeric)

    def encode_text(self, batch: FeatureBatch) -> Tensor:
        return self.text(batch.text, batch.text_mask)

    def encode_spatial(self, batch: FeatureBatch, boundary=None) -> Tensor:
        return self.spatial(batch.boundary if boundary is None else boundary, batch.spatial)

    def encode(self, batch: FeatureBatch, boundary=None) -> dict[str, Tensor]:
        latents = {}
        if 'tab' in self.modalities:
            latents['tab'] = self.encode_tabular(batch)
        if 'text' in self.modalities:
            latents['text'] = self.encode_text(batch)
        if 'spatial' in self.modalities:
            latents['spatial'] = self.encode_spatial(batch, boundary)
        return latents

    # fusion and heads -------------------------------------------------------
    def gated_fuse(self, latents: dict[str, Tensor]) -> tuple[Tensor, Tensor]:
        zs = [latents[m] for m in self.modalities]
        n = zs[0].shape[0]
        if self.gate is None:
            return self.fusion(zs[0]), Tensor(np.ones((n, 1)))
        alpha = self.gate(F.concat(zs, axis=-1))
        weighted = [alpha[:, i:i + 1] * z for i, z in enumerate(zs)]
        return self.fusion(F.concat(weighted, axis=-1)), alpha

    def predict_heads(self, z_fuse: Tensor) -> tuple[Tensor, Tensor]:
        y_hat = self.regression(z_fuse)
        logits = self.bands(z_fuse).reshape(z_fuse.shape[0], len(TARGETS), self.config.n_bands)
        return y_hat, logits

    def fuse_and_predict(self, latents: dict[str, Tensor]) -> FusionOutput:
        z_fuse, alpha = self.gated_fuse(latents)
        y_hat, logits = self.predict_heads(z_fuse)
        return FusionOutput(latents, alpha, z_fuse, y_hat, logits)

    def forward(self, batch: FeatureBatch, boundary=None) -> FusionOutput:
        return self.fuse_and_predict(self.encode(batch, boundary))

    def predict(self, batch: FeatureBatch, chunk: int = 1024) -> tuple[np.ndarray, np.ndarray]:
        """Eval-mode (normalized predictions, alpha) for every row, in chunks."""
        was_training = self.training
        self.eval()
        y, alpha = [], []
        try:
            with no_grad():
                for start in range(0, len(batch), chunk):
                    out = self.forward(batch.take(np.arange(start, min(start + chunk, len(batch)))))
                    y.append(out.y_hat.data)
                    alpha.append(out.alpha.data)
        finally:
            self.train(was_training)
        if not y:
            return np.empty((0, len(TARGETS))), np.empty((0, len(self.modalities)))
        return np.concatenate(y), np.concatenate(alpha)

    # optimisation -----------------------------------------------------------
    def param_groups(self, lr: float, projection_lr: float) -> list[ParamGroup]:
        """The text projection trains at its own rate, everything else at *lr*."""
        projection = {id(p) for p in self.text.parameters()} if 'text' in self.modalities else set()
        rest = [p for p in self.parameters() if id(p) not in projection]
        groups = [ParamGroup('default', rest, lr)]
        if projection:
            groups.append(ParamGroup(TEXT_PROJECTION_GROUP, self.text.parameters(), projection_lr))
        return groups

    def architecture(self) -> dict:
        return {'model': _model_dict(self.config), 'vocab_sizes': self.vocab_sizes, 'seed': self.seed}


def build_ablation_model(modalities, config: ModelConfig, vocab_sizes: list[int], seed: int = 0) -> FusionModel:
    """The fusion model restricted to *modalities* (any non-empty subset of
    tab / text / spatial)."""
    modalities = tuple(modalities)
    if not modalities:
        raise InvalidConfig("an ablation model needs at least one modality")
    unknown = set(modalities) - set(MODALITIES)
    if unknown:
        raise InvalidConfig(f"unknown modalities {sorted(unknown)}")
    return FusionModel(dataclasses.replace(config, modalities=modalities), vocab_sizes, seed)


def _model_dict(config: ModelConfig) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(config).items()}


def save_model(path: str | Path, model: FusionModel, scaler: TargetScaler, preprocessor: Preprocessor,
               config_hash: str, seed: int, extra: dict | None = None) -> Path:
    header = {
        'config_hash': config_hash,
        'seed': seed,
        'architecture': model.architecture(),
        'modalities': list(model.modalities),
        'target_scaler': scaler.to_dict(),
        'preprocessor': preprocessor.to_dict(),
        **(extra or {}),
    }
    return save_checkpoint(path, model.state_dict(), header)


def load_model(path: str | Path) -> tuple[FusionModel, TargetScaler, Preprocessor, dict]:
    header, params = load_checkpoint(path)
    try:
        arch = header['architecture']
        config = ModelConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in arch['model'].items()})
        model = FusionModel(config, arch['vocab_sizes'], arch['seed'])
        scaler = TargetScaler.from_dict(header['target_scaler'])
        preprocessor = Preprocessor.from_dict(header['preprocessor'])
    except (KeyError, TypeError) as e:
        raise SchemaMismatch(f"checkpoint header incomplete: {e}") from e
    model.load_state_dict(params)
    model.eval()
    return model, scaler, preprocessor, header
