"""Layers and small networks built on the tensor substrate."""

from __future__ import annotations

import numpy as np

from ..streams import Stream
from .tensor import Tensor, concat, embedding, gelu, softmax

ACTIVATIONS = ("tanh", "gelu")


class Module:
    """Base class: walks attributes to collect parameters and buffers.

    Parameter names mirror the attribute path (``block.0.weight`` style) so
    optimizer state and checkpoints key on stable names.
    """

    def __init__(self):
        self.training = True

    def _children(self):
        for name in sorted(vars(self)):
            attr = getattr(self, name)
            if isinstance(attr, Module):
                yield name, attr
            elif isinstance(attr, (list, tuple)):
                for i, item in enumerate(attr):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item

    def parameters(self, prefix: str = "") -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        for name in sorted(vars(self)):
            attr = getattr(self, name)
            if isinstance(attr, Tensor) and attr.requires_grad:
                params[prefix + name] = attr
        for name, child in self._children():
            params.update(child.parameters(prefix=f"{prefix}{name}."))
        return params

    def buffers(self, prefix: str = "") -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for name in sorted(getattr(self, "_buffer_names", ())):
            out[prefix + name] = getattr(self, name)
        for name, child in self._children():
            out.update(child.buffers(prefix=f"{prefix}{name}."))
        return out

    def register_buffer(self, name: str, array: np.ndarray) -> None:
        setattr(self, name, np.asarray(array, dtype=np.float64))
        names = set(getattr(self, "_buffer_names", ()))
        names.add(name)
        self._buffer_names = tuple(sorted(names))

    def state_arrays(self) -> dict[str, np.ndarray]:
        state = {name: p.value for name, p in self.parameters().items()}
        state.update(self.buffers())
        return state

    def load_state(self, arrays: dict[str, np.ndarray]) -> None:
        for name, param in self.parameters().items():
            if name not in arrays:
                raise KeyError(f"checkpoint is missing parameter {name!r}")
            incoming = np.asarray(arrays[name], dtype=np.float64)
            if incoming.shape != param.value.shape:
                raise ValueError(
                    f"shape mismatch for {name!r}: {incoming.shape} vs {param.value.shape}"
                )
            param.value[...] = incoming
        for name in self.buffers():
            if name not in arrays:
                raise KeyError(f"checkpoint is missing buffer {name!r}")
            self._assign_buffer(name, arrays[name])

    def _assign_buffer(self, dotted: str, array: np.ndarray) -> None:
        obj = self
        parts = dotted.split(".")
        for part in parts[:-1]:
            obj = obj[int(part)] if part.isdigit() else getattr(obj, part)
        target = getattr(obj, parts[-1])
        target[...] = np.asarray(array, dtype=np.float64).reshape(target.shape)

    def train(self, flag: bool = True):
        self.training = flag
        for _, child in self._children():
            child.train(flag)
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self) -> None:
        for param in self.parameters().values():
            param.zero_grad()


class Linear(Module):
    def __init__(self, in_dim: int, out_dim: int, stream: Stream, bias: bool = True):
        super().__init__()
        scale = 1.0 / np.sqrt(in_dim)
        self.weight = Tensor(stream.normal((in_dim, out_dim), scale), requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim), requires_grad=True) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = x @ self.weight
        if self.bias is not None:
            out = out + self.bias
        return out


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        super().__init__()
        self.gamma = Tensor(np.ones(dim), requires_grad=True)
        self.beta = Tensor(np.zeros(dim), requires_grad=True)
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        mu = x.mean(axis=-1, keepdims=True)
        centered = x - mu
        var = (centered * centered).mean(axis=-1, keepdims=True)
        inv = (var + self.eps) ** -0.5
        return centered * inv * self.gamma + self.beta


class Dropout(Module):
    def __init__(self, p: float, stream: Stream):
        super().__init__()
        if not 0.0 <= p < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {p}")
        self.p = p
        self.stream = stream

    def __call__(self, x: Tensor) -> Tensor:
        if not self.training or self.p == 0.0:
            return x
        mask = (self.stream.uniform(size=x.shape) >= self.p) / (1.0 - self.p)
        return x * mask


def activate(x: Tensor, kind: str) -> Tensor:
    if kind == "tanh":
        return x.tanh()
    if kind == "gelu":
        return gelu(x)
    raise ValueError(f"unknown activation {kind!r}; pick from {ACTIVATIONS}")


class MLP(Module):
    """Plain feed-forward stack; optional layer norm and dropout per hidden layer."""

    def __init__(
        self,
        widths: list[int],
        stream: Stream,
        activation: str = "tanh",
        layer_norm: bool = False,
        dropout: float = 0.0,
    ):
        super().__init__()
        if len(widths) < 2:
            raise ValueError("MLP needs at least input and output widths")
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.activation = activation
        children = stream.spawn(len(widths))
        self.layers = [
            Linear(a, b, s) for (a, b), s in zip(zip(widths[:-1], widths[1:]), children)
        ]
        self.norms = (
            [LayerNorm(w) for w in widths[1:-1]] if layer_norm else []
        )
        self.dropouts = (
            [Dropout(dropout, s) for s in stream.spawn(len(widths) - 2)]
            if dropout > 0 and len(widths) > 2
            else []
        )

    def __call__(self, x: Tensor) -> Tensor:
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < last:
                if self.norms:
                    x = self.norms[i](x)
                x = activate(x, self.activation)
                if self.dropouts:
                    x = self.dropouts[i](x)
        return x


class Embedding(Module):
    def __init__(self, vocab: int, dim: int, stream: Stream):
        super().__init__()
        self.weight = Tensor(stream.normal((vocab, dim), 0.02), requires_grad=True)

    def __call__(self, indices: np.ndarray) -> Tensor:
        return embedding(self.weight, indices)


class MultiHeadSelfAttention(Module):
    def __init__(self, dim: int, heads: int, stream: Stream):
        super().__init__()
        if dim % heads:
            raise ValueError(f"width {dim} not divisible by {heads} heads")
        self.heads = heads
        self.head_dim = dim // heads
        s_q, s_k, s_v, s_o = stream.spawn(4)
        self.wq = Linear(dim, dim, s_q)
        self.wk = Linear(dim, dim, s_k)
        self.wv = Linear(dim, dim, s_v)
        self.wo = Linear(dim, dim, s_o)

    def __call__(self, x: Tensor) -> Tensor:
        batch, length, dim = x.shape

        def split(t: Tensor) -> Tensor:
            return t.reshape(batch, length, self.heads, self.head_dim).transpose(
                (0, 2, 1, 3)
            )

        q, k, v = split(self.wq(x)), split(self.wk(x)), split(self.wv(x))
        scores = (q @ k.swap_last_axes()) * (1.0 / np.sqrt(self.head_dim))
        weights = softmax(scores, axis=-1)
        mixed = weights @ v
        merged = mixed.transpose((0, 2, 1, 3)).reshape(batch, length, dim)
        return self.wo(merged)


class TransformerBlock(Module):
    """Pre-norm block: x + attn(LN(x)); x + mlp(LN(x))."""

    def __init__(self, dim: int, heads: int, stream: Stream, dropout: float = 0.0):
        super().__init__()
        s_attn, s_mlp, s_drop = stream.spawn(3)
        self.norm1 = LayerNorm(dim)
        self.attn = MultiHeadSelfAttention(dim, heads, s_attn)
        self.norm2 = LayerNorm(dim)
        self.mlp = MLP([dim, 4 * dim, dim], s_mlp, activation="gelu")
        self.drop = Dropout(dropout, s_drop) if dropout > 0 else None

    def __call__(self, x: Tensor) -> Tensor:
        attended = self.attn(self.norm1(x))
        if self.drop is not None:
            attended = self.drop(attended)
        x = x + attended
        fed = self.mlp(self.norm2(x))
        if self.drop is not None:
            fed = self.drop(fed)
        return x + fed


def sinusoidal_embedding(positions: np.ndarray, dim: int) -> np.ndarray:
    """Fixed sin/cos position code; rows index positions, columns frequencies."""
    positions = np.atleast_1d(np.asarray(positions, dtype=np.float64))
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / max(half - 1, 1))
    args = positions[:, None] * freqs[None, :]
    emb = np.concatenate([np.sin(args), np.cos(args)], axis=-1)
    if dim % 2:
        emb = np.pad(emb, ((0, 0), (0, 1)))
    return emb


def fourier_features(s, b_matrix: np.ndarray) -> np.ndarray:
    """[cos(2 pi B s); sin(2 pi B s)] for scalar input s (batched).

    ``b_matrix`` is a frozen (m, 1) frequency matrix; output is (batch, 2m).
    """
    s = np.atleast_1d(np.asarray(s, dtype=np.float64)).reshape(-1, 1)
    args = 2.0 * np.pi * (s @ b_matrix.T)
    return np.concatenate([np.cos(args), np.sin(args)], axis=-1)


def fourier_features_tangent(s, b_matrix: np.ndarray) -> np.ndarray:
    """d/ds of ``fourier_features`` (the input tangent for dual-mode sweeps)."""
    s = np.atleast_1d(np.asarray(s, dtype=np.float64)).reshape(-1, 1)
    args = 2.0 * np.pi * (s @ b_matrix.T)
    scale = 2.0 * np.pi * b_matrix.T
    return np.concatenate([-np.sin(args) * scale, np.cos(args) * scale], axis=-1)
