"""Deterministic seeded randomness and weight initialization.

The generator is SplitMix64, written out here so that the exact stream is
part of the repository rather than whatever the platform provides:

    state_{n+1} = (state_n + 0x9E3779B97F4A7C15) mod 2^64
    output_n    = mix(state_{n+1})
    mix(z): z ^= z >> 30; z *= 0xBF58476D1CE4E5B9  (mod 2^64)
            z ^= z >> 27; z *= 0x94D049BB133111EB  (mod 2^64)
            z ^= z >> 31

Uniforms take the top 53 bits; Gaussians come from the Box-Muller
transform over consecutive uniform pairs.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .ops import ConvKernel

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    # vectorized _mix on uint64; numpy unsigned arithmetic wraps mod 2^64
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


class SeededRng:
    """SplitMix64 stream. Same seed gives the same stream everywhere."""

    def __init__(self, seed: int):
        self.seed = seed & _MASK
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        return _mix(self._state)

    def uniform(self, n: int) -> np.ndarray:
        """n uniforms in [0, 1) with 53-bit resolution."""
        if n < 0:
            raise ValueError("n must be non-negative")
        if n == 0:
            return np.zeros(0)
        with np.errstate(over="ignore"):
            steps = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(_GAMMA)
            states = np.uint64(self._state) + steps
        out = _mix_array(states)
        self._state = int(states[-1])
        return (out >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


def normal_sample(rng: SeededRng, n: int) -> np.ndarray:
    """n standard-normal draws via Box-Muller over the uniform stream."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return np.zeros(0)
    m = (n + 1) // 2
    u1 = rng.uniform(m)
    u2 = rng.uniform(m)
    u1 = np.maximum(u1, 2.0 ** -53)  # keep log finite
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
    return z[:n]


class InitScheme(str, Enum):
    KAIMING = "kaiming"
    XAVIER = "xavier"


class ReinitPolicy(str, Enum):
    ONCE = "once"
    EACH_EPOCH = "each_epoch"


def init_std(scheme: InitScheme, out_channels: int, in_channels: int, kh: int, kw: int) -> float:
    fan_in = in_channels * kh * kw
    fan_out = out_channels * kh * kw
    if scheme == InitScheme.KAIMING:
        return float(np.sqrt(2.0 / fan_in))
    if scheme == InitScheme.XAVIER:
        return float(np.sqrt(2.0 / (fan_in + fan_out)))
    raise ValueError(f"unknown init scheme {scheme!r}")


def init_kernel(rng: SeededRng, shape, scheme: InitScheme, bias: bool = True) -> ConvKernel:
    """Gaussian-initialized kernel; biases start at zero under both schemes."""
    o, i, kh, kw = shape
    std = init_std(scheme, o, i, kh, kw)
    w = std * normal_sample(rng, o * i * kh * kw).reshape(o, i, kh, kw)
    b = np.zeros(o) if bias else None
    return ConvKernel(w, b)


_NET_SALT = 0xA24BAED4963EE407
_EPOCH_SALT = 0x9FB21C651E98DF25


def derive_epoch_seed(base_seed: int, net_index: int, epoch: int) -> int:
    """Deterministic seed for loss network ``net_index`` at ``epoch``.

    Three rounds of SplitMix64 finalization, salting the net index and the
    epoch with distinct odd constants so that (i, e) and (e, i) collide
    only with negligible probability.
    """
    s = _mix((base_seed + _GAMMA) & _MASK)
    s = _mix((s ^ ((net_index * _NET_SALT) & _MASK)) + _GAMMA & _MASK)
    s = _mix((s ^ ((epoch * _EPOCH_SALT) & _MASK)) + _GAMMA & _MASK)
    return s
