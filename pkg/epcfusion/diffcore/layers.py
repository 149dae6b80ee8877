"""Parameterised layers and the module tree."""

from typing import Iterator

import numpy as np

from ..errors import ShapeError
from . import functional as F
from .tensor import Parameter, Tensor


class Module:
    """Holds parameters and child modules as attributes; names follow
    attribute insertion order, so ``named_parameters`` is deterministic."""

    training: bool = True

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def children(self) -> Iterator[tuple[str, "Module"]]:
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix: str = '') -> Iterator[tuple[str, Parameter]]:
        for name, value in vars(self).items():
            if isinstance(value, Parameter):
                yield prefix + name, value
        for name, child in self.children():
            yield from child.named_parameters(f"{prefix}{name}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for _, child in self.children():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        params = dict(self.named_parameters())
        missing, unexpected = set(params) - set(state), set(state) - set(params)
        if missing or unexpected:
            raise ShapeError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(unexpected)}")
        for name, p in params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.shape:
                raise ShapeError(f"{name}: stored shape {value.shape}, model shape {p.shape}")
            p.data = value.copy()


class DropoutStream:
    """Counter-based source of dropout masks: the n-th mask drawn under
    seed s depends only on (s, n)."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.counter = 0

    def keep_mask(self, shape, p: float) -> np.ndarray:
        rng = np.random.default_rng([self.seed, self.counter])
        self.counter += 1
        return rng.random(shape) >= p


class Dense(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        limit = np.sqrt(6.0 / (n_in + n_out))
        self.weight = Parameter(rng.uniform(-limit, limit, (n_in, n_out)))
        self.bias = Parameter(np.zeros(n_out))

    def forward(self, x) -> Tensor:
        return F.dense(x, self.weight, self.bias)


class Embedding(Module):
    def __init__(self, vocab: int, dim: int, rng: np.random.Generator):
        self.weight = Parameter(rng.normal(0.0, 0.02, (vocab, dim)))

    def forward(self, indices) -> Tensor:
        return F.embedding_lookup(self.weight, indices)


class Conv1d(Module):
    def __init__(self, c_in: int, c_out: int, kernel: int, rng: np.random.Generator):
        limit = np.sqrt(6.0 / (kernel * c_in + kernel * c_out))
        self.weight = Parameter(rng.uniform(-limit, limit, (kernel, c_in, c_out)))
        self.bias = Parameter(np.zeros(c_out))

    def forward(self, x) -> Tensor:
        return F.conv1d(x, self.weight, self.bias)


class Dropout(Module):
    def __init__(self, p: float, stream: DropoutStream):
        self.p = p
        self.stream = stream

    def forward(self, x) -> Tensor:
        if not self.training or self.p == 0:
            return x
        return F.dropout(x, self.p, self.stream.keep_mask(x.shape, self.p))


class MLP(Module):
    """Dense -> ReLU -> Dropout per layer."""

    def __init__(self, n_in: int, sizes, dropout: float, stream: DropoutStream, rng: np.random.Generator):
        self.layers = []
        for size in sizes:
            self.layers.append(Dense(n_in, size, rng))
            n_in = size
        self.dropout = Dropout(dropout, stream)
        self.out_features = n_in

    def forward(self, x) -> Tensor:
        for layer in self.layers:
            x = self.dropout(F.relu(layer(x)))
        return x
