"""Adam with parameter groups, global-norm clipping and a plateau scheduler."""

from dataclasses import dataclass, field

import numpy as np
from loguru import logger

from ..errors import InvalidConfig
from .tensor import Parameter


@dataclass
class ParamGroup:
    name: str
    params: list[Parameter]
    lr: float

    def __post_init__(self):
        if self.lr <= 0:
            raise InvalidConfig(f"learning rate of group {self.name} must be positive")


def global_grad_norm(params) -> float:
    return float(np.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params if p.grad is not None)))


def clip_grad_norm(params, max_norm: float = 1.0) -> float:
    """Scale every gradient by ``max_norm / norm`` when the global norm exceeds
    *max_norm*; returns the norm before clipping."""
    norm = global_grad_norm(params)
    if norm > max_norm:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * scale
    return norm


@dataclass
class OptimState:
    """First/second moments per parameter (group order), step counter."""
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    step: int = 0


class Adam:
    def __init__(self, groups: list[ParamGroup], beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.groups = groups
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.state = OptimState([np.zeros_like(p.data) for g in groups for p in g.params],
                                [np.zeros_like(p.data) for g in groups for p in g.params])

    @property
    def params(self) -> list[Parameter]:
        return [p for g in self.groups for p in g.params]

    @property
    def learning_rates(self) -> dict[str, float]:
        return {g.name: g.lr for g in self.groups}

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        state = self.state
        state.step += 1
        bc1 = 1.0 - self.beta1 ** state.step
        bc2 = 1.0 - self.beta2 ** state.step
        i = 0
        for group in self.groups:
            for p in group.params:
                g = p.grad if p.grad is not None else np.zeros_like(p.data)
                m, v = state.m[i], state.v[i]
                m *= self.beta1
                m += (1.0 - self.beta1) * g
                v *= self.beta2
                v += (1.0 - self.beta2) * (g * g)
                p.data = p.data - group.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
                i += 1

    def scale_lr(self, factor: float):
        for group in self.groups:
            group.lr *= factor


class PlateauScheduler:
    """Multiply every group's rate by *factor* once the monitored loss has not
    improved (strictly) for *patience* consecutive epochs; the count restarts
    after each reduction and on every improvement."""

    def __init__(self, optimizer: Adam, factor: float = 0.5, patience: int = 5):
        self.optimizer = optimizer
        self.factor = factor
        self.patience = patience
        self.best = np.inf
        self.bad_epochs = 0

    def step(self, loss: float) -> bool:
        if loss < self.best:
            self.best = loss
            self.bad_epochs = 0
            return False
        self.bad_epochs += 1
        if self.bad_epochs >= self.patience:
            self.optimizer.scale_lr(self.factor)
            self.bad_epochs = 0
            logger.info("validation loss flat for {} epochs, learning rates now {}", self.patience,
                        self.optimizer.learning_rates)
            return True
        return False
