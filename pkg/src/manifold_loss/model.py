"""Desk-scale residual denoiser and its Adam optimizer.

A small conv stack predicts the noise; the model output is input minus
the predicted noise (DnCNN-style residual learning). Forward/backward
are composed from the hand-written conv adjoints in ops.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .ops import ConvKernel
from .rng import InitScheme, SeededRng, init_kernel


@dataclass
class ModelConfig:
    depth: int = 5
    channels: int = 16
    kernel: int = 3

    def __post_init__(self):
        if self.depth < 2:
            raise ValueError("model depth must be >= 2")


class DenoiserModel:
    """Residual conv stack: out = x - stack(x)."""

    def __init__(self, cfg: ModelConfig, image_channels: int, seed: int):
        self.cfg = cfg
        self.image_channels = image_channels
        rng = SeededRng(seed)
        shapes = [(cfg.channels, image_channels, cfg.kernel, cfg.kernel)]
        shapes += [(cfg.channels, cfg.channels, cfg.kernel, cfg.kernel)] * (cfg.depth - 2)
        shapes.append((image_channels, cfg.channels, cfg.kernel, cfg.kernel))
        self.kernels = [init_kernel(rng, s, InitScheme.KAIMING) for s in shapes]

    def forward(self, x, with_cache=False):
        cache = []
        cur = x
        last = len(self.kernels) - 1
        for idx, k in enumerate(self.kernels):
            pre = ops.conv2d(cur, k)
            cache.append((cur, pre if idx != last else None))
            cur = ops.relu(pre) if idx != last else pre
        out = x - cur
        return (out, cache) if with_cache else out

    def backward(self, cache, upstream):
        """Parameter gradients given d(loss)/d(output)."""
        g = -upstream  # residual subtraction
        grads = [None] * len(self.kernels)
        for idx in range(len(self.kernels) - 1, -1, -1):
            x_in, pre = cache[idx]
            if pre is not None:
                g = ops.relu_vjp(pre, g)
            g, gw, gb = ops.conv2d_vjp(x_in, self.kernels[idx], g)
            grads[idx] = (gw, gb)
        return grads

    def parameters(self):
        for k in self.kernels:
            yield k


class Adam:
    """Standard Adam over the model's kernels (weights and biases)."""

    def __init__(self, model: DenoiserModel, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.model = model
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [
            (np.zeros_like(k.weights), np.zeros_like(k.bias)) for k in model.kernels
        ]
        self.v = [
            (np.zeros_like(k.weights), np.zeros_like(k.bias)) for k in model.kernels
        ]

    def step(self, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for idx, (k, (gw, gb)) in enumerate(zip(self.model.kernels, grads)):
            for slot, (param, grad) in enumerate(((k.weights, gw), (k.bias, gb))):
                m = self.m[idx][slot]
                v = self.v[idx][slot]
                m *= b1
                m += (1.0 - b1) * grad
                v *= b2
                v += (1.0 - b2) * grad * grad
                param -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
