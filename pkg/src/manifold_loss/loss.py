"""Total training loss: image-level norm plus random-weight feature priors.

total = ||gt - y|| + lambda * mean_i ||f_i(gt) - f_i(y)||

where each f_i is a fixed-weight manifold network. Within one step both
branches of every prior term use identical frozen weights; gradients flow
only to the prediction y.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import manifolds, ops
from .rng import ReinitPolicy, derive_epoch_seed


@dataclass
class LossSpec:
    base_norm: str = ops.L2
    lam: float = 0.1  # serialized as "lambda"
    nets: list = field(default_factory=list)
    reinit_per_batch: bool = False  # optional finer-than-epoch redraws

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.base_norm not in (ops.L1, ops.L2):
            raise ValueError(f"base_norm must be L1 or L2, got {self.base_norm!r}")


def refresh_weights(spec: LossSpec, base_seed: int, epoch: int, image_channels: int = 1):
    """Draw (or re-draw) the fixed weights for every configured net.

    Nets with the once policy always use epoch 0's derived seed, so their
    weights are bit-identical across epochs.
    """
    weights = []
    for i, cfg in enumerate(spec.nets):
        e = epoch if cfg.reinit == ReinitPolicy.EACH_EPOCH else 0
        seed = derive_epoch_seed(base_seed, i, e)
        weights.append(manifolds.draw_weights(cfg, image_channels, seed))
    return weights


def prior_loss(spec: LossSpec, weights_per_net, gt, y):
    """Mean over nets of the feature-space distance; 0 for an empty ensemble."""
    if gt.shape != y.shape:
        raise ops.ShapeError(f"shape mismatch {gt.shape} vs {y.shape}")
    if not spec.nets:
        return 0.0
    total = 0.0
    for cfg, w in zip(spec.nets, weights_per_net):
        fg = manifolds.manifold_forward(cfg, w, gt)
        fy = manifolds.manifold_forward(cfg, w, y)
        total += ops.reduce_norm(fg, fy, spec.base_norm)
    return total / len(spec.nets)


def total_loss(spec: LossSpec, weights_per_net, gt, y):
    """Returns (total, base, prior) for logging."""
    base = ops.reduce_norm(gt, y, spec.base_norm)
    prior = prior_loss(spec, weights_per_net, gt, y)
    return base + spec.lam * prior, base, prior


def total_loss_grad(spec: LossSpec, weights_per_net, gt, y):
    """Exact gradient of total_loss with respect to y.

    reduce_norm(gt, y) differentiated in its second argument is minus the
    first-argument gradient; same for each feature-space term.
    """
    grad = -ops.reduce_norm_grad(gt, y, spec.base_norm)
    if spec.nets and spec.lam > 0.0:
        scale = spec.lam / len(spec.nets)
        for cfg, w in zip(spec.nets, weights_per_net):
            fg = manifolds.manifold_forward(cfg, w, gt)
            fy, cache = manifolds.manifold_forward(cfg, w, y, with_cache=True)
            up = -ops.reduce_norm_grad(fg, fy, spec.base_norm)
            grad = grad + scale * manifolds.manifold_vjp(cfg, w, cache, up)
    return grad
