"""Random-weights networks as loss prior constraints for image restoration.

Four mathematically constrained fixed-weight feature extractors (Taylor
unfolding, additive-coupling invertible nets, central-difference
convolution, reverse filtering) used as feature-space loss terms, plus a
desk-scale denoising harness and ablation runner.
"""

from .loss import LossSpec, prior_loss, refresh_weights, total_loss, total_loss_grad
from .manifolds import (
    CDC,
    INN,
    REVERSE,
    TAYLOR,
    RandomNetConfig,
    contraction_coefficient,
    draw_weights,
    gaussian_bank,
    manifold_forward,
    reverse_filter,
)
from .ops import ConvKernel, conv2d, conv2d_vjp, finite_diff_grad, reduce_norm
from .rng import InitScheme, ReinitPolicy, SeededRng, derive_epoch_seed, normal_sample

__all__ = [
    "CDC", "INN", "REVERSE", "TAYLOR",
    "ConvKernel", "InitScheme", "LossSpec", "RandomNetConfig", "ReinitPolicy",
    "SeededRng", "contraction_coefficient", "conv2d", "conv2d_vjp",
    "derive_epoch_seed", "draw_weights", "finite_diff_grad", "gaussian_bank",
    "manifold_forward", "normal_sample", "prior_loss", "reduce_norm",
    "refresh_weights", "reverse_filter", "total_loss", "total_loss_grad",
]

__version__ = "0.1.0"
