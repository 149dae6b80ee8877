"""Differentiable primitives used by the encoders, the gate and the losses."""

import numpy as np

from ..errors import ShapeError
from .tensor import Function, Tensor, as_tensor


def _broadcast(a: np.ndarray, b: np.ndarray, op: str):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as e:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from e


class Add(Function):
    @staticmethod
    def forward(ctx, a, b):
        _broadcast(a, b, 'add')
        return a + b

    @staticmethod
    def backward(ctx, grad):
        return grad, grad


class Neg(Function):
    @staticmethod
    def forward(ctx, a):
        return -a

    @staticmethod
    def backward(ctx, grad):
        return -grad


class Mul(Function):
    @staticmethod
    def forward(ctx, a, b):
        _broadcast(a, b, 'mul')
        ctx.a, ctx.b = a, b
        return a * b

    @staticmethod
    def backward(ctx, grad):
        return grad * ctx.b, grad * ctx.a


class MatMul(Function):
    @staticmethod
    def forward(ctx, a, b):
        if a.ndim < 1 or b.ndim != 2 or a.shape[-1] != b.shape[0]:
            raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
        ctx.a, ctx.b = a, b
        return a @ b

    @staticmethod
    def backward(ctx, grad):
        a, b = ctx.a, ctx.b
        ga = grad @ b.T
        gb = a.reshape(-1, a.shape[-1]).T @ grad.reshape(-1, b.shape[1])
        return ga, gb


class Dense(Function):
    """x (..., in) @ W (in, out) + b (out,)."""

    @staticmethod
    def forward(ctx, x, w, b):
        if x.shape[-1] != w.shape[0] or b.shape != (w.shape[1],):
            raise ShapeError(f"dense: input {x.shape}, weight {w.shape}, bias {b.shape}")
        ctx.x, ctx.w = x, w
        return x @ w + b

    @staticmethod
    def backward(ctx, grad):
        x, w = ctx.x, ctx.w
        flat_grad = grad.reshape(-1, w.shape[1])
        gx = grad @ w.T
        gw = x.reshape(-1, w.shape[0]).T @ flat_grad
        gb = flat_grad.sum(axis=0)
        return gx, gw, gb


class EmbeddingLookup(Function):
    @staticmethod
    def forward(ctx, table, indices=None):
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
            raise ShapeError(f"embedding: index outside [0, {table.shape[0]})")
        ctx.idx, ctx.shape = idx, table.shape
        return table[idx]

    @staticmethod
    def backward(ctx, grad):
        g = np.zeros(ctx.shape)
        np.add.at(g, ctx.idx, grad)
        return g


class Conv1d(Function):
    """Same-length 1-D convolution over (B, L, C_in) with kernel (K, C_in, C_out),
    zero padding (K - 1) / 2 on both ends."""

    @staticmethod
    def forward(ctx, x, w, b):
        if x.ndim != 3 or w.ndim != 3 or x.shape[2] != w.shape[1] or b.shape != (w.shape[2],):
            raise ShapeError(f"conv1d: input {x.shape}, kernel {w.shape}, bias {b.shape}")
        k = w.shape[0]
        pad = (k - 1) // 2
        length = x.shape[1]
        xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
        out = np.broadcast_to(b, (x.shape[0], length, w.shape[2])).copy()
        for j in range(k):
            out += xp[:, j:j + length, :] @ w[j]
        ctx.xp, ctx.w, ctx.pad, ctx.length = xp, w, pad, length
        return out

    @staticmethod
    def backward(ctx, grad):
        xp, w, pad, length = ctx.xp, ctx.w, ctx.pad, ctx.length
        gxp = np.zeros_like(xp)
        gw = np.zeros_like(w)
        flat_grad = grad.reshape(-1, w.shape[2])
        for j in range(w.shape[0]):
            gxp[:, j:j + length, :] += grad @ w[j].T
            gw[j] = xp[:, j:j + length, :].reshape(-1, w.shape[1]).T @ flat_grad
        gx = gxp[:, pad:pad + length, :]
        return gx, gw, flat_grad.sum(axis=0)


class ReLU(Function):
    @staticmethod
    def forward(ctx, x):
        # Subgradient at zero is 0.
        ctx.mask = x > 0
        return np.where(ctx.mask, x, 0.0)

    @staticmethod
    def backward(ctx, grad):
        return grad * ctx.mask


class Sum(Function):
    @staticmethod
    def forward(ctx, x, axis=None, keepdims=False):
        ctx.shape, ctx.axis, ctx.keepdims = x.shape, axis, keepdims
        return np.sum(x, axis=axis, keepdims=keepdims)

    @staticmethod
    def backward(ctx, grad):
        if ctx.axis is not None and not ctx.keepdims:
            grad = np.expand_dims(grad, ctx.axis)
        return np.broadcast_to(grad, ctx.shape).copy()


class Reshape(Function):
    @staticmethod
    def forward(ctx, x, shape=None):
        ctx.shape = x.shape
        try:
            return x.reshape(shape)
        except ValueError as e:
            raise ShapeError(f"reshape: {x.shape} to {shape}") from e

    @staticmethod
    def backward(ctx, grad):
        return grad.reshape(ctx.shape)


class GetItem(Function):
    @staticmethod
    def forward(ctx, x, index=None):
        ctx.shape, ctx.index = x.shape, index
        return x[index]

    @staticmethod
    def backward(ctx, grad):
        g = np.zeros(ctx.shape)
        np.add.at(g, ctx.index, grad)
        return g


class Concat(Function):
    @staticmethod
    def forward(ctx, *arrays, axis=-1):
        try:
            out = np.concatenate(arrays, axis=axis)
        except ValueError as e:
            raise ShapeError(f"concat: {[a.shape for a in arrays]} along axis {axis}") from e
        ctx.axis = axis
        ctx.splits = np.cumsum([a.shape[axis] for a in arrays])[:-1]
        return out

    @staticmethod
    def backward(ctx, grad):
        return tuple(np.split(grad, ctx.splits, axis=ctx.axis))


class Softmax(Function):
    @staticmethod
    def forward(ctx, x, axis=-1):
        shifted = np.exp(x - x.max(axis=axis, keepdims=True))
        y = shifted / shifted.sum(axis=axis, keepdims=True)
        ctx.y, ctx.axis = y, axis
        return y

    @staticmethod
    def backward(ctx, grad):
        y = ctx.y
        return y * (grad - np.sum(grad * y, axis=ctx.axis, keepdims=True))


class MaskedMean(Function):
    """Mean of x (B, K, H) over the K slots whose mask (B, K) is 1."""

    @staticmethod
    def forward(ctx, x, mask):
        if x.ndim != 3 or mask.shape != x.shape[:2]:
            raise ShapeError(f"masked mean: values {x.shape}, mask {mask.shape}")
        counts = mask.sum(axis=1, keepdims=True)
        if np.any(counts <= 0):
            raise ShapeError("masked mean over a row with no present slot")
        ctx.weights = (mask / counts)[:, :, None]
        return np.sum(x * ctx.weights, axis=1)

    @staticmethod
    def backward(ctx, grad):
        return grad[:, None, :] * ctx.weights, None


class Huber(Function):
    @staticmethod
    def forward(ctx, pred, target, delta=1.0):
        if pred.shape != target.shape:
            raise ShapeError(f"huber: prediction {pred.shape} vs target {target.shape}")
        e = pred - target
        quadratic = np.abs(e) <= delta
        ctx.e, ctx.quadratic, ctx.delta = e, quadratic, delta
        loss = np.where(quadratic, 0.5 * e * e, delta * (np.abs(e) - 0.5 * delta))
        return np.mean(loss)

    @staticmethod
    def backward(ctx, grad):
        # At |e| = delta the quadratic branch applies.
        de = np.where(ctx.quadratic, ctx.e, ctx.delta * np.sign(ctx.e)) / ctx.e.size
        return grad * de, None


class CrossEntropy(Function):
    """Mean over rows of -log softmax(logits)[label]."""

    @staticmethod
    def forward(ctx, logits, labels=None):
        labels = np.asarray(labels, dtype=np.int64)
        if logits.ndim != 2 or labels.shape != (logits.shape[0],):
            raise ShapeError(f"cross entropy: logits {logits.shape}, labels {labels.shape}")
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_z = np.log(np.exp(shifted).sum(axis=1))
        rows = np.arange(len(labels))
        ctx.probs = np.exp(shifted - log_z[:, None])
        ctx.labels = labels
        return np.mean(log_z - shifted[rows, labels])

    @staticmethod
    def backward(ctx, grad):
        g = ctx.probs.copy()
        g[np.arange(len(ctx.labels)), ctx.labels] -= 1.0
        return grad * g / len(ctx.labels)


def add(a, b) -> Tensor:
    return Add.apply(a, b)


def neg(a) -> Tensor:
    return Neg.apply(a)


def mul(a, b) -> Tensor:
    return Mul.apply(a, b)


def matmul(a, b) -> Tensor:
    return MatMul.apply(a, b)


def dense(x, w, b) -> Tensor:
    return Dense.apply(x, w, b)


def embedding_lookup(table, indices) -> Tensor:
    return EmbeddingLookup.apply(table, indices=indices)


def conv1d(x, w, b) -> Tensor:
    return Conv1d.apply(x, w, b)


def relu(x) -> Tensor:
    return ReLU.apply(x)


def sum_(x, axis=None, keepdims=False) -> Tensor:
    return Sum.apply(x, axis=axis, keepdims=keepdims)


def mean(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    count = x.size if axis is None else x.shape[axis]
    return mul(sum_(x, axis=axis, keepdims=keepdims), 1.0 / count)


def global_average_pool(x) -> Tensor:
    """(B, L, C) -> (B, C)."""
    return mean(x, axis=1)


def masked_mean_pool(x, mask) -> Tensor:
    return MaskedMean.apply(x, as_tensor(mask))


def reshape(x, shape) -> Tensor:
    return Reshape.apply(x, shape=tuple(shape))


def getitem(x, index) -> Tensor:
    return GetItem.apply(x, index=index)


def concat(tensors, axis=-1) -> Tensor:
    return Concat.apply(*tensors, axis=axis)


def softmax(x, axis=-1) -> Tensor:
    return Softmax.apply(x, axis=axis)


def dropout(x, p: float, mask: np.ndarray | None) -> Tensor:
    """Inverted dropout with a caller-supplied keep mask; ``mask=None`` is identity."""
    if mask is None or p == 0:
        return as_tensor(x)
    return mul(x, mask.astype(np.float64) / (1.0 - p))


def huber_loss(pred, target, delta: float = 1.0) -> Tensor:
    return Huber.apply(pred, target, delta=delta)


def cross_entropy(logits, labels) -> Tensor:
    return CrossEntropy.apply(logits, labels=labels)
