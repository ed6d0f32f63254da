"""Dense NCHW tensor operations with hand-written adjoints.

Everything here works on plain float64 numpy arrays of shape
(batch, channels, height, width). Each forward operation that needs to
participate in gradient computation has a matching ``*_vjp`` function
returning the exact vector-Jacobian products. There is deliberately no
autodiff tape: the manifolds compose these adjoints by hand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

ZERO = "zero"
CIRCULAR = "circular"


class ShapeError(ValueError):
    """Raised when tensor/kernel shapes are incompatible."""


def as_tensor(values, shape=None):
    """Coerce to a 4-D float64 array, validating rank and finiteness."""
    x = np.asarray(values, dtype=np.float64)
    if shape is not None:
        x = x.reshape(shape)
    if x.ndim != 4:
        raise ShapeError(f"expected a 4-D (N,C,H,W) tensor, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("tensor contains non-finite values")
    return x


@dataclass
class ConvKernel:
    """Convolution weights shaped (out_channels, in_channels, kh, kw).

    kh and kw must be odd so that stride-1 "same" padding is symmetric.
    bias is per-out-channel, or None.
    """

    weights: np.ndarray
    bias: np.ndarray | None = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 4:
            raise ShapeError(f"kernel must be 4-D (O,I,kh,kw), got {self.weights.shape}")
        _, _, kh, kw = self.weights.shape
        if kh % 2 == 0 or kw % 2 == 0:
            raise ShapeError(f"kernel extents must be odd, got {kh}x{kw}")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("kernel weights contain non-finite values")
        if self.bias is not None:
            self.bias = np.asarray(self.bias, dtype=np.float64)
            if self.bias.shape != (self.weights.shape[0],):
                raise ShapeError(
                    f"bias shape {self.bias.shape} does not match "
                    f"{self.weights.shape[0]} output channels"
                )

    @property
    def out_channels(self):
        return self.weights.shape[0]

    @property
    def in_channels(self):
        return self.weights.shape[1]


def _pad(x, ph, pw, padding):
    if padding == ZERO:
        mode = "constant"
    elif padding == CIRCULAR:
        N, C, H, W = x.shape
        if ph > H or pw > W:
            raise ShapeError(
                f"circular padding ({ph},{pw}) exceeds spatial extents ({H},{W})"
            )
        mode = "wrap"
    else:
        raise ValueError(f"unknown padding mode {padding!r}")
    return np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)), mode=mode)


def conv2d(x, k: ConvKernel, padding=ZERO):
    """Stride-1 same-size 2-D convolution (cross-correlation convention).

    y[n,o,h,w] = sum_{c,i,j} w[o,c,i,j] * x[n,c,h+i-ph,w+j-pw] + bias[o],
    with out-of-bounds reads resolved by the padding mode.
    """
    if x.ndim != 4:
        raise ShapeError(f"expected 4-D input, got shape {x.shape}")
    N, C, H, W = x.shape
    O, I, kh, kw = k.weights.shape
    if C != I:
        raise ShapeError(
            f"input has {C} channels but kernel expects {I} "
            f"(input {x.shape}, kernel {k.weights.shape})"
        )
    ph, pw = kh // 2, kw // 2
    xp = _pad(x, ph, pw, padding)
    # im2col: (N,H,W, C*kh*kw) @ (C*kh*kw, O)
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))  # (N,C,H,W,kh,kw)
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(N * H * W, C * kh * kw)
    y = cols @ k.weights.reshape(O, -1).T
    y = y.reshape(N, H, W, O).transpose(0, 3, 1, 2)
    if k.bias is not None:
        y = y + k.bias[None, :, None, None]
    return np.ascontiguousarray(y)


def _fold_padding(gp, ph, pw, padding):
    """Collapse gradients on padded cells back onto the core region."""
    N, C, Hp, Wp = gp.shape
    H, W = Hp - 2 * ph, Wp - 2 * pw
    if padding == ZERO:
        return gp[:, :, ph : ph + H, pw : pw + W].copy()
    g = gp.copy()
    if ph:
        g[:, :, Hp - 2 * ph : Hp - ph, :] += g[:, :, :ph, :]
        g[:, :, ph : 2 * ph, :] += g[:, :, Hp - ph :, :]
    if pw:
        g[:, :, :, Wp - 2 * pw : Wp - pw] += g[:, :, :, :pw]
        g[:, :, :, pw : 2 * pw] += g[:, :, :, Wp - pw :]
    return g[:, :, ph : ph + H, pw : pw + W].copy()


def conv2d_vjp(x, k: ConvKernel, upstream, padding=ZERO):
    """Exact adjoints of conv2d.

    Returns (grad_x, grad_weights, grad_bias); grad_bias is None when the
    kernel has no bias.
    """
    N, C, H, W = x.shape
    O, I, kh, kw = k.weights.shape
    if C != I:
        raise ShapeError(
            f"input has {C} channels but kernel expects {I}"
        )
    if upstream.shape != (N, O, H, W):
        raise ShapeError(
            f"upstream shape {upstream.shape} does not match conv output "
            f"{(N, O, H, W)}"
        )
    ph, pw = kh // 2, kw // 2
    xp = _pad(x, ph, pw, padding)
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(N * H * W, C * kh * kw)
    up = upstream.transpose(0, 2, 3, 1).reshape(N * H * W, O)

    grad_w = (up.T @ cols).reshape(O, C, kh, kw)
    grad_b = upstream.sum(axis=(0, 2, 3)) if k.bias is not None else None

    # grad wrt the padded input, then fold the margins per padding mode
    gcols = up @ k.weights.reshape(O, -1)  # (N*H*W, C*kh*kw)
    gcols = gcols.reshape(N, H, W, C, kh, kw)
    grad_xp = np.zeros_like(xp)
    for i in range(kh):
        for j in range(kw):
            grad_xp[:, :, i : i + H, j : j + W] += gcols[:, :, :, :, i, j].transpose(
                0, 3, 1, 2
            )
    grad_x = _fold_padding(grad_xp, ph, pw, padding)
    return grad_x, grad_w, grad_b


def channel_split(x):
    """Split channels into halves [0..C/2) and [C/2..C)."""
    C = x.shape[1]
    if C % 2 != 0:
        raise ShapeError(f"channel_split needs an even channel count, got {C}")
    return x[:, : C // 2].copy(), x[:, C // 2 :].copy()


def channel_concat(a, b):
    if a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise ShapeError(
            f"channel_concat needs matching N,H,W: {a.shape} vs {b.shape}"
        )
    return np.concatenate([a, b], axis=1)


def space_to_depth(x, factor=2):
    """(N,C,H,W) -> (N,C*f^2,H/f,W/f).

    Output channel c*f^2 + dy*f + dx holds sub-pixel (dy, dx) of input
    channel c, so a 1x1x2x2 block [[1,2],[3,4]] becomes channels (1,2,3,4).
    """
    N, C, H, W = x.shape
    f = factor
    if H % f or W % f:
        raise ShapeError(f"spatial extents ({H},{W}) not divisible by {f}")
    z = x.reshape(N, C, H // f, f, W // f, f)
    z = z.transpose(0, 1, 3, 5, 2, 4)  # (N,C,dy,dx,H/f,W/f)
    return z.reshape(N, C * f * f, H // f, W // f).copy()


def depth_to_space(x, factor=2):
    """Exact inverse of space_to_depth."""
    N, C, H, W = x.shape
    f = factor
    if C % (f * f):
        raise ShapeError(f"channel count {C} not divisible by {f * f}")
    z = x.reshape(N, C // (f * f), f, f, H, W)
    z = z.transpose(0, 1, 4, 2, 5, 3)  # (N,C',H,dy,W,dx)
    return z.reshape(N, C // (f * f), H * f, W * f).copy()


def relu(x):
    return np.maximum(x, 0.0)


def relu_vjp(pre, upstream):
    """Adjoint of relu given the pre-activation values."""
    return upstream * (pre > 0.0)


L1 = "L1"
L2 = "L2"


def reduce_norm(a, b, norm=L1):
    """Mean image-level distance: L1 = mean|a-b|, L2 = mean((a-b)^2)."""
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ShapeError("empty tensors have no norm")
    d = a - b
    if norm == L1:
        return float(np.mean(np.abs(d)))
    if norm == L2:
        return float(np.mean(d * d))
    raise ValueError(f"unknown norm {norm!r}")


def reduce_norm_grad(a, b, norm=L1):
    """Gradient of reduce_norm(a, b) with respect to a.

    L1 subgradient at zero residual is 0 (sign convention).
    """
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    d = a - b
    if norm == L1:
        return np.sign(d) / d.size
    if norm == L2:
        return 2.0 * d / d.size
    raise ValueError(f"unknown norm {norm!r}")


def finite_diff_grad(f, x, step=1e-5):
    """Central-difference gradient oracle: (f(x+de_i) - f(x-de_i)) / 2d."""
    if step <= 0:
        raise ValueError("step must be positive")
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = f(x)
        flat[i] = orig - step
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * step)
    return g
