"""Minimal differentiable-computation layer: float64 tensors with reverse-mode
gradients, standard layers, AdamW, EMA shadows, and checkpoint I/O."""

from .tensor import Tensor, no_grad  # noqa: F401
