"""Fixed-weight loss-network prototypes.

Four feature extractors, each a pure differentiable map from an image
tensor to a feature tensor, built so that a useful mathematical property
holds by construction:

* Taylor unfolding: a mapping stack F plus a shared derivative stack G,
  combined as F(y) + sum_k g^k / k! where g^{k+1} = G(concat(g^k, y)).
* Additive-coupling invertible net: exactly invertible, unit Jacobian.
* Central-difference convolution: conv plus a theta-weighted central
  difference term that annihilates constants at theta = 1.
* Reverse filtering: fixed-point iteration x <- x + y - f(x) against a
  multi-scale Gaussian blur, a contraction whenever max|1 - lambda_i| < 1
  over the blur's DFT eigenvalues.

All weights are drawn once from a seeded stream and never trained; the
``*_vjp`` functions propagate gradients to the *input* only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import ops
from .ops import CIRCULAR, ZERO, ConvKernel, ShapeError
from .rng import InitScheme, ReinitPolicy, SeededRng, init_kernel, normal_sample

TAYLOR = "taylor"
INN = "inn"
CDC = "cdc"
REVERSE = "reverse"

KINDS = (TAYLOR, INN, CDC, REVERSE)


@dataclass
class RandomNetConfig:
    """Full description of one fixed-weight loss network."""

    kind: str = CDC
    depth: int = 3
    channels: int = 16
    kernel: int = 3
    theta: float = 0.7
    order_n: int = 3
    iterations_k: int = 8
    sigmas: tuple = (0.5, 1.0, 2.0)
    init: InitScheme = InitScheme.KAIMING
    reinit: ReinitPolicy = ReinitPolicy.ONCE
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown manifold kind {self.kind!r}; choose from {KINDS}")
        if not (0.0 <= self.theta <= 1.0):
            raise ValueError(f"theta must be in [0,1], got {self.theta}")
        if self.order_n < 0:
            raise ValueError(f"order_n must be >= 0, got {self.order_n}")
        if self.iterations_k < 1:
            raise ValueError(f"iterations_k must be >= 1, got {self.iterations_k}")
        if self.kind == REVERSE:
            if len(self.sigmas) == 0 or any(s <= 0 for s in self.sigmas):
                raise ValueError("sigmas must be non-empty and positive")
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")


# ---------------------------------------------------------------------------
# plain conv stacks (ReLU between layers, linear tail)
# ---------------------------------------------------------------------------


def stack_forward(x, kernels, padding=ZERO):
    """Conv stack with ReLU between layers and an activation-free tail.

    Returns (out, cache); the cache holds per-layer inputs and
    pre-activations for the adjoint pass.
    """
    cache = []
    cur = x
    last = len(kernels) - 1
    for idx, k in enumerate(kernels):
        pre = ops.conv2d(cur, k, padding)
        cache.append((cur, pre if idx != last else None))
        cur = ops.relu(pre) if idx != last else pre
    return cur, cache


def stack_vjp(kernels, cache, upstream, padding=ZERO, want_param_grads=False):
    """Adjoint of stack_forward. Returns grad wrt the stack input.

    With want_param_grads, also returns per-layer (grad_w, grad_b).
    """
    grads = [None] * len(kernels)
    g = upstream
    for idx in range(len(kernels) - 1, -1, -1):
        x_in, pre = cache[idx]
        if pre is not None:  # interior layer: undo the ReLU first
            g = ops.relu_vjp(pre, g)
        g, gw, gb = ops.conv2d_vjp(x_in, kernels[idx], g, padding)
        if want_param_grads:
            grads[idx] = (gw, gb)
    return (g, grads) if want_param_grads else g


def stack_preactivations(cache):
    """Pre-activation arrays feeding ReLUs (for kink-distance checks)."""
    return [pre for _, pre in cache if pre is not None]


def _stack_shapes(in_ch, out_ch, hidden, depth, kernel):
    """Kernel shapes for a depth-layer stack in_ch -> hidden.. -> out_ch."""
    if depth == 1:
        return [(out_ch, in_ch, kernel, kernel)]
    shapes = [(hidden, in_ch, kernel, kernel)]
    shapes += [(hidden, hidden, kernel, kernel)] * (depth - 2)
    shapes.append((out_ch, hidden, kernel, kernel))
    return shapes


def _draw_stack(rng, in_ch, out_ch, hidden, depth, kernel, scheme):
    return [
        init_kernel(rng, s, scheme)
        for s in _stack_shapes(in_ch, out_ch, hidden, depth, kernel)
    ]


# ---------------------------------------------------------------------------
# Taylor unfolding manifold
# ---------------------------------------------------------------------------


@dataclass
class TaylorNet:
    """Mapping stack F (image -> channels) and shared derivative stack G.

    G consumes concat(g^k, y) and is reused unchanged at every order.
    """

    f_kernels: list
    g_kernels: list
    image_channels: int


def draw_taylor(cfg: RandomNetConfig, image_channels: int, seed: int) -> TaylorNet:
    rng = SeededRng(seed)
    f = _draw_stack(rng, image_channels, cfg.channels, cfg.channels, cfg.depth,
                    cfg.kernel, cfg.init)
    g = _draw_stack(rng, cfg.channels + image_channels, cfg.channels, cfg.channels,
                    cfg.depth, cfg.kernel, cfg.init)
    return TaylorNet(f, g, image_channels)


def taylor_forward(net: TaylorNet, y, order_n, with_cache=False):
    """O = F(y) + sum_{k=1..n} g^k / k!, g^{k+1} = G(concat(g^k, y))."""
    if y.shape[1] != net.image_channels:
        raise ShapeError(
            f"input has {y.shape[1]} channels, net expects {net.image_channels}"
        )
    f_out, f_cache = stack_forward(y, net.f_kernels)
    out = f_out.copy()
    g_caches = []
    g_vals = []
    prev = f_out
    for k in range(1, order_n + 1):
        gk, ck = stack_forward(ops.channel_concat(prev, y), net.g_kernels)
        g_vals.append(gk)
        g_caches.append(ck)
        out = out + gk / math.factorial(k)
        prev = gk
    if not with_cache:
        return out
    return out, {"f_cache": f_cache, "g_caches": g_caches, "order_n": order_n}


def taylor_vjp(net: TaylorNet, cache, upstream):
    """Gradient of taylor_forward wrt the input image."""
    n = cache["order_n"]
    grad_y = np.zeros_like(cache["f_cache"][0][0])
    feat_ch = net.f_kernels[-1].out_channels
    grad_prev = None  # grad flowing into g^k's output from g^{k+1}
    grad_f_extra = np.zeros_like(upstream)
    for k in range(n, 0, -1):
        up_k = upstream / math.factorial(k)
        if grad_prev is not None:
            up_k = up_k + grad_prev
        g_in = stack_vjp(net.g_kernels, cache["g_caches"][k - 1], up_k)
        grad_prev = g_in[:, :feat_ch]
        grad_y += g_in[:, feat_ch:]
    if grad_prev is not None:
        grad_f_extra = grad_prev  # g^1 was driven by F(y)
    grad_y += stack_vjp(net.f_kernels, cache["f_cache"], upstream + grad_f_extra)
    return grad_y


# ---------------------------------------------------------------------------
# Invertible coupling manifold
# ---------------------------------------------------------------------------


@dataclass
class InnNet:
    """Stack of additive coupling blocks over the space_to_depth domain."""

    blocks: list = field(default_factory=list)  # [(f_kernels, g_kernels), ...]
    image_channels: int = 1


def draw_inn(cfg: RandomNetConfig, image_channels: int, seed: int) -> InnNet:
    rng = SeededRng(seed)
    half = 2 * image_channels  # space_to_depth quadruples channels
    blocks = []
    for _ in range(cfg.depth):
        f = _draw_stack(rng, half, half, cfg.channels, 3, cfg.kernel, cfg.init)
        g = _draw_stack(rng, half, half, cfg.channels, 3, cfg.kernel, cfg.init)
        blocks.append((f, g))
    return InnNet(blocks, image_channels)


def coupling_body_forward(net: InnNet, z, with_cache=False):
    """Apply the coupling blocks to a tensor already in the s2d domain."""
    caches = []
    for f_k, g_k in net.blocks:
        x1, x2 = ops.channel_split(z)
        f_out, f_cache = stack_forward(x2, f_k)
        y1 = x1 + f_out
        g_out, g_cache = stack_forward(y1, g_k)
        y2 = x2 + g_out
        caches.append((f_cache, g_cache))
        z = ops.channel_concat(y1, y2)
    return (z, caches) if with_cache else z


def inn_forward(net: InnNet, x, with_cache=False):
    """space_to_depth followed by the additive coupling blocks."""
    z = ops.space_to_depth(x)
    out = coupling_body_forward(net, z, with_cache)
    if with_cache:
        return out[0], {"body": out[1]}
    return out


def inn_inverse(net: InnNet, y):
    """Undo the blocks in reverse order, then depth_to_space."""
    half = 2 * net.image_channels
    if y.shape[1] != 2 * half:
        raise ShapeError(
            f"input has {y.shape[1]} channels, expected {2 * half}"
        )
    z = y
    for f_k, g_k in reversed(net.blocks):
        y1, y2 = ops.channel_split(z)
        g_out, _ = stack_forward(y1, g_k)
        x2 = y2 - g_out
        f_out, _ = stack_forward(x2, f_k)
        x1 = y1 - f_out
        z = ops.channel_concat(x1, x2)
    return ops.depth_to_space(z)


def inn_vjp(net: InnNet, cache, upstream):
    """Gradient of inn_forward wrt the input image."""
    g = upstream
    for (f_k, g_k), (f_cache, g_cache) in zip(
        reversed(net.blocks), reversed(cache["body"])
    ):
        gy1, gy2 = ops.channel_split(g)
        # y2 = x2 + G(y1); y1 = x1 + F(x2)
        gy1 = gy1 + stack_vjp(g_k, g_cache, gy2)
        gx1 = gy1
        gx2 = gy2 + stack_vjp(f_k, f_cache, gy1)
        g = ops.channel_concat(gx1, gx2)
    # space_to_depth is a permutation: its adjoint is the inverse
    return ops.depth_to_space(g)


def inn_jacobian_det(net: InnNet, z, step=1e-6):
    """Determinant of the finite-difference Jacobian of the coupling body.

    z lives in the space_to_depth domain (even channel count);
    space_to_depth itself is a permutation with determinant +-1 and is
    excluded here. Dense Jacobian, so inputs are capped at 64 elements.
    """
    if z.size > 64:
        raise ShapeError(f"jacobian materialization capped at 64 elements, got {z.size}")
    n = z.size
    jac = np.zeros((n, n))
    flat = z.reshape(-1)
    for i in range(n):
        orig = flat[i]
        flat[i] = orig + step
        fp = coupling_body_forward(net, z).reshape(-1)
        flat[i] = orig - step
        fm = coupling_body_forward(net, z).reshape(-1)
        flat[i] = orig
        jac[:, i] = (fp - fm) / (2.0 * step)
    return float(np.linalg.det(jac))


# ---------------------------------------------------------------------------
# Central difference convolution manifold
# ---------------------------------------------------------------------------


@dataclass
class CdcNet:
    kernels: list
    theta: float
    image_channels: int


def draw_cdc(cfg: RandomNetConfig, image_channels: int, seed: int) -> CdcNet:
    rng = SeededRng(seed)
    kernels = _draw_stack(rng, image_channels, cfg.channels, cfg.channels,
                          cfg.depth, cfg.kernel, cfg.init)
    return CdcNet(kernels, cfg.theta, image_channels)


def cdc_layer(x, k: ConvKernel, theta):
    """conv(x, k) - theta * x(p0) (.) kernel_channel_sums; bias applied once."""
    if not (0.0 <= theta <= 1.0):
        raise ValueError(f"theta must be in [0,1], got {theta}")
    vanilla = ops.conv2d(x, k, ZERO)
    csum = k.weights.sum(axis=(2, 3))  # (O, I)
    central = np.einsum("nchw,oc->nohw", x, csum)
    return vanilla - theta * central


def cdc_layer_reference(x, k: ConvKernel, theta):
    """Test oracle: theta * CDC + (1 - theta) * vanilla, with both parts
    evaluated by explicit nested loops over the neighborhood (the CDC part
    as literal neighbor-minus-center differences) and bias added once.

    Slow by design; only for small instances in tests.
    """
    N, C, H, W = x.shape
    O, _, kh, kw = k.weights.shape
    r_h, r_w = kh // 2, kw // 2
    out = np.zeros((N, O, H, W))
    for n in range(N):
        for o in range(O):
            for h in range(H):
                for w in range(W):
                    van = 0.0
                    cdc = 0.0
                    for c in range(C):
                        center = x[n, c, h, w]
                        for dy in range(-r_h, r_h + 1):
                            for dx in range(-r_w, r_w + 1):
                                hh, ww = h + dy, w + dx
                                v = x[n, c, hh, ww] if 0 <= hh < H and 0 <= ww < W else 0.0
                                wgt = k.weights[o, c, dy + r_h, dx + r_w]
                                van += wgt * v
                                cdc += wgt * (v - center)
                    out[n, o, h, w] = theta * cdc + (1.0 - theta) * van
    if k.bias is not None:
        out += k.bias[None, :, None, None]
    return out


def cdc_layer_vjp(x, k: ConvKernel, theta, upstream):
    grad_x, grad_w, grad_b = ops.conv2d_vjp(x, k, upstream, ZERO)
    csum = k.weights.sum(axis=(2, 3))
    grad_x = grad_x - theta * np.einsum("nohw,oc->nchw", upstream, csum)
    return grad_x, grad_w, grad_b


def cdc_forward(net: CdcNet, x, with_cache=False):
    """CDC layers with ReLU between and an activation-free tail."""
    cache = []
    cur = x
    last = len(net.kernels) - 1
    for idx, k in enumerate(net.kernels):
        pre = cdc_layer(cur, k, net.theta)
        cache.append((cur, pre if idx != last else None))
        cur = ops.relu(pre) if idx != last else pre
    return (cur, {"layers": cache}) if with_cache else cur


def cdc_vjp(net: CdcNet, cache, upstream):
    g = upstream
    for idx in range(len(net.kernels) - 1, -1, -1):
        x_in, pre = cache["layers"][idx]
        if pre is not None:
            g = ops.relu_vjp(pre, g)
        g, _, _ = cdc_layer_vjp(x_in, net.kernels[idx], net.theta, g)
    return g


# ---------------------------------------------------------------------------
# Reverse filtering manifold
# ---------------------------------------------------------------------------


def gaussian_bank(sigmas):
    """Normalized truncated Gaussian kernels, side 2*ceil(3*sigma)+1 each.

    Kernels are single-channel (applied depthwise), all-positive, sum 1.
    """
    bank = []
    for sigma in sigmas:
        if sigma <= 0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        r = math.ceil(3.0 * sigma)
        ax = np.arange(-r, r + 1, dtype=np.float64)
        g = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * sigma * sigma))
        g /= g.sum()
        bank.append(ConvKernel(g[None, None], None))
    return bank


@dataclass
class ReverseNet:
    """Random convex mixture of fixed Gaussian blurs, inverted by
    fixed-point iteration with circular padding."""

    kernels: list
    mix_weights: np.ndarray
    iterations_k: int

    def __post_init__(self):
        w = np.asarray(self.mix_weights, dtype=np.float64)
        if w.ndim != 1 or len(w) != len(self.kernels):
            raise ShapeError("one mix weight per Gaussian scale required")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("mix weights must be positive and sum to 1")
        self.mix_weights = w


def draw_reverse(cfg: RandomNetConfig, image_channels: int, seed: int) -> ReverseNet:
    rng = SeededRng(seed)
    logits = normal_sample(rng, len(cfg.sigmas))
    e = np.exp(logits - logits.max())
    return ReverseNet(gaussian_bank(cfg.sigmas), e / e.sum(), cfg.iterations_k)


def _blur(net: ReverseNet, x):
    """f(x): the mixed Gaussian blur, depthwise with circular padding."""
    N, C, H, W = x.shape
    flat = x.reshape(N * C, 1, H, W)
    out = np.zeros_like(flat)
    for w, k in zip(net.mix_weights, net.kernels):
        out += w * ops.conv2d(flat, k, CIRCULAR)
    return out.reshape(N, C, H, W)


def _blur_adjoint(net: ReverseNet, upstream):
    N, C, H, W = upstream.shape
    flat = upstream.reshape(N * C, 1, H, W)
    out = np.zeros_like(flat)
    zeros = np.zeros_like(flat)
    for w, k in zip(net.mix_weights, net.kernels):
        gx, _, _ = ops.conv2d_vjp(zeros, k, flat, CIRCULAR)
        out += w * gx
    return out.reshape(N, C, H, W)


def reverse_filter(net: ReverseNet, y, with_cache=False, return_iterates=False):
    """x^0 = y; x^{k+1} = x^k + y - f(x^k); returns x^{iterations_k}."""
    x = y.copy()
    iterates = [x.copy()]
    for _ in range(net.iterations_k):
        x = x + y - _blur(net, x)
        if return_iterates:
            iterates.append(x.copy())
    if return_iterates:
        return iterates
    if with_cache:
        return x, {}
    return x


def reverse_vjp(net: ReverseNet, cache, upstream):
    """Gradient wrt y; the iteration is linear in (x, y) so no saved state
    is needed beyond the iteration count."""
    grad_y = np.zeros_like(upstream)
    g = upstream
    for _ in range(net.iterations_k):
        grad_y += g
        g = g - _blur_adjoint(net, g)
    return grad_y + g  # x^0 = y


def filter_eigenvalues(net: ReverseNet, shape):
    """Real DFT eigenvalues of the mixed blur on an H x W circular grid."""
    H, W = shape
    base = np.zeros((H, W))
    for w, k in zip(net.mix_weights, net.kernels):
        kh, kw = k.weights.shape[2:]
        if kh > H or kw > W:
            raise ShapeError(f"kernel {kh}x{kw} larger than grid {H}x{W}")
        r_h, r_w = kh // 2, kw // 2
        for dy in range(-r_h, r_h + 1):
            for dx in range(-r_w, r_w + 1):
                base[dy % H, dx % W] += w * k.weights[0, 0, dy + r_h, dx + r_w]
    return np.real(np.fft.fft2(base))


def contraction_coefficient(net: ReverseNet, shape):
    """c = max_i |1 - lambda_i| over the DFT eigenvalues of the blur.

    The fixed-point iteration contracts (and reverse filtering converges)
    exactly when c < 1. Returns (c, c < 1).
    """
    lam = filter_eigenvalues(net, shape)
    c = float(np.max(np.abs(1.0 - lam)))
    return c, c < 1.0


# ---------------------------------------------------------------------------
# dispatcher
# ---------------------------------------------------------------------------


def draw_weights(cfg: RandomNetConfig, image_channels: int, seed: int):
    """Draw the full fixed-weight state for one loss network."""
    if cfg.kind == TAYLOR:
        return draw_taylor(cfg, image_channels, seed)
    if cfg.kind == INN:
        return draw_inn(cfg, image_channels, seed)
    if cfg.kind == CDC:
        return draw_cdc(cfg, image_channels, seed)
    if cfg.kind == REVERSE:
        return draw_reverse(cfg, image_channels, seed)
    raise ValueError(f"unknown manifold kind {cfg.kind!r}")


def manifold_forward(cfg: RandomNetConfig, weights, y, with_cache=False):
    """Route to the configured manifold; pure given (cfg, weights, y)."""
    if cfg.kind == TAYLOR:
        return taylor_forward(weights, y, cfg.order_n, with_cache)
    if cfg.kind == INN:
        return inn_forward(weights, y, with_cache)
    if cfg.kind == CDC:
        return cdc_forward(weights, y, with_cache)
    if cfg.kind == REVERSE:
        return reverse_filter(weights, y, with_cache)
    raise ValueError(f"unknown manifold kind {cfg.kind!r}")


def manifold_vjp(cfg: RandomNetConfig, weights, cache, upstream):
    """Gradient of manifold_forward wrt the input image."""
    if cfg.kind == TAYLOR:
        return taylor_vjp(weights, cache, upstream)
    if cfg.kind == INN:
        return inn_vjp(weights, cache, upstream)
    if cfg.kind == CDC:
        return cdc_vjp(weights, cache, upstream)
    if cfg.kind == REVERSE:
        return reverse_vjp(weights, cache, upstream)
    raise ValueError(f"unknown manifold kind {cfg.kind!r}")


def manifold_preactivations(cfg: RandomNetConfig, cache):
    """ReLU pre-activations recorded during a cached forward pass."""
    pres = []
    if cfg.kind == TAYLOR:
        pres += stack_preactivations(cache["f_cache"])
        for c in cache["g_caches"]:
            pres += stack_preactivations(c)
    elif cfg.kind == INN:
        for f_cache, g_cache in cache["body"]:
            pres += stack_preactivations(f_cache)
            pres += stack_preactivations(g_cache)
    elif cfg.kind == CDC:
        pres += [pre for _, pre in cache["layers"] if pre is not None]
    return pres
