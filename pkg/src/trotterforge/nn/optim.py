"""AdamW with decoupled weight decay, global-norm clipping, and EMA shadows."""

from __future__ import annotations

import contextlib

import numpy as np

from .tensor import Tensor


class AdamW:
    def __init__(
        self,
        params: dict[str, Tensor],
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ):
        self.params = dict(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = {name: np.zeros_like(p.value) for name, p in self.params.items()}
        self.v = {name: np.zeros_like(p.value) for name, p in self.params.items()}

    def zero_grad(self) -> None:
        for param in self.params.values():
            param.zero_grad()

    def step(self) -> None:
        self.step_count += 1
        b1, b2 = self.betas
        bias1 = 1.0 - b1**self.step_count
        bias2 = 1.0 - b2**self.step_count
        for name, param in self.params.items():
            grad = param.grad
            if grad is None:
                continue
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * grad
            v *= b2
            v += (1.0 - b2) * grad**2
            update = (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            if self.weight_decay:
                update = update + self.weight_decay * param.value
            param.value -= self.lr * update

    def state_arrays(self) -> dict[str, np.ndarray]:
        state = {f"adam.m.{name}": m for name, m in self.m.items()}
        state.update({f"adam.v.{name}": v for name, v in self.v.items()})
        state["adam.step"] = np.array([float(self.step_count)])
        return state

    def load_state(self, arrays: dict[str, np.ndarray]) -> None:
        for name in self.m:
            self.m[name][...] = arrays[f"adam.m.{name}"].reshape(self.m[name].shape)
            self.v[name][...] = arrays[f"adam.v.{name}"].reshape(self.v[name].shape)
        self.step_count = int(arrays["adam.step"][0])


def clip_global_norm(params: dict[str, Tensor], max_norm: float) -> float:
    """Scale gradients in place so their joint L2 norm is at most max_norm."""
    total = 0.0
    for param in params.values():
        if param.grad is not None:
            total += float((param.grad**2).sum())
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0:
        scale = max_norm / norm
        for param in params.values():
            if param.grad is not None:
                param.grad *= scale
    return norm


class Ema:
    """Shadow copy of parameters: shadow <- decay * shadow + (1 - decay) * live."""

    def __init__(self, params: dict[str, Tensor], decay: float):
        if not 0.0 <= decay <= 1.0:
            raise ValueError(f"decay must be in [0, 1], got {decay}")
        self.decay = decay
        self.shadow = {name: p.value.copy() for name, p in params.items()}

    def update(self, params: dict[str, Tensor]) -> None:
        d = self.decay
        for name, param in params.items():
            self.shadow[name] *= d
            self.shadow[name] += (1.0 - d) * param.value

    @contextlib.contextmanager
    def swapped_in(self, params: dict[str, Tensor]):
        """Temporarily run with shadow weights (sampling path)."""
        saved = {name: p.value.copy() for name, p in params.items()}
        for name, param in params.items():
            param.value[...] = self.shadow[name]
        try:
            yield
        finally:
            for name, param in params.items():
                param.value[...] = saved[name]

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {f"ema.{name}": arr for name, arr in self.shadow.items()}

    def load_state(self, arrays: dict[str, np.ndarray]) -> None:
        for name in self.shadow:
            self.shadow[name][...] = arrays[f"ema.{name}"].reshape(
                self.shadow[name].shape
            )
