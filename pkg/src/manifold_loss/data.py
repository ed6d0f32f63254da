"""Synthetic denoising data and PGM image I/O.

Clean images are a procedural mix of a linear gradient background plus
random rectangles and disks, all in [0,1]; noisy versions add clamped
Gaussian noise. Every pair is a pure function of (dataset seed, index).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rng import SeededRng, derive_epoch_seed, normal_sample

DEFAULT_NOISE_SIGMA = 25.0 / 255.0


@dataclass
class SyntheticDatasetSpec:
    count: int = 512
    size: int = 32
    noise_sigma: float = DEFAULT_NOISE_SIGMA
    seed: int = 0
    val_count: int = 32

    def __post_init__(self):
        if not (0.0 <= self.noise_sigma < 1.0):
            raise ValueError(f"noise_sigma must be in [0,1), got {self.noise_sigma}")
        if self.count < 1 or self.val_count < 1:
            raise ValueError("count and val_count must be >= 1")
        if self.size < 11:
            raise ValueError("size must be >= 11 (SSIM window)")


# image-content stream is namespaced away from everything else via a
# dedicated "net index" in the seed derivation
_CONTENT_STREAM = 0x5D
_NOISE_STREAM = 0x6E


def _clean_image(rng: SeededRng, size: int) -> np.ndarray:
    u = rng.uniform(6)
    # oriented linear gradient background
    yy, xx = np.meshgrid(np.linspace(0, 1, size), np.linspace(0, 1, size), indexing="ij")
    img = 0.2 + 0.4 * (u[0] * yy + (1.0 - u[0]) * xx)
    n_shapes = 2 + int(u[1] * 3)  # 2..4 shapes
    for _ in range(n_shapes):
        s = rng.uniform(6)
        cy, cx = s[0] * size, s[1] * size
        half = (0.08 + 0.17 * s[2]) * size
        val = 0.1 + 0.8 * s[3]
        if s[4] < 0.5:  # rectangle
            y0, y1 = int(max(0, cy - half)), int(min(size, cy + half))
            x0, x1 = int(max(0, cx - half)), int(min(size, cx + half))
            img[y0:y1, x0:x1] = val
        else:  # disk
            mask = (yy * size - cy) ** 2 + (xx * size - cx) ** 2 <= half ** 2
            img[mask] = val
    return np.clip(img, 0.0, 1.0)


def gen_synthetic_pair(spec: SyntheticDatasetSpec, index: int):
    """Deterministic (clean, noisy) pair, both shaped (1,1,size,size)."""
    total = spec.count + spec.val_count
    if not (0 <= index < total):
        raise IndexError(f"index {index} out of range [0, {total})")
    crng = SeededRng(derive_epoch_seed(spec.seed, _CONTENT_STREAM, index))
    clean = _clean_image(crng, spec.size)[None, None]
    nrng = SeededRng(derive_epoch_seed(spec.seed, _NOISE_STREAM, index))
    noise = spec.noise_sigma * normal_sample(nrng, spec.size * spec.size).reshape(
        1, 1, spec.size, spec.size
    )
    noisy = np.clip(clean + noise, 0.0, 1.0)
    return clean, noisy


def train_indices(spec: SyntheticDatasetSpec):
    return list(range(spec.count))


def val_indices(spec: SyntheticDatasetSpec):
    # disjoint from training by index range
    return list(range(spec.count, spec.count + spec.val_count))


def write_pgm(path, image, binary=True):
    """Write a (H,W) or (1,1,H,W) array in [0,1] as P5 (or P2) PGM."""
    img = np.asarray(image, dtype=np.float64)
    img = img.reshape(img.shape[-2], img.shape[-1])
    pix = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
    path = Path(path)
    h, w = pix.shape
    if binary:
        with open(path, "wb") as fh:
            fh.write(f"P5\n{w} {h}\n255\n".encode())
            fh.write(pix.tobytes())
    else:
        lines = "\n".join(" ".join(str(v) for v in row) for row in pix)
        path.write_text(f"P2\n{w} {h}\n255\n{lines}\n")


def read_pgm(path):
    """Read a P2 or P5 PGM back into a (1,1,H,W) array in [0,1]."""
    raw = Path(path).read_bytes()
    if raw[:2] == b"P5":
        header, rest = raw.split(b"\n", 1)
        # header tokens: magic, width, height, maxval (whitespace-separated)
        tokens = []
        while len(tokens) < 3:
            line, rest = rest.split(b"\n", 1)
            if line.startswith(b"#"):
                continue
            tokens += line.split()
        w, h, maxval = (int(t) for t in tokens[:3])
        pix = np.frombuffer(rest[: w * h], dtype=np.uint8).reshape(h, w)
    elif raw[:2] == b"P2":
        tokens = [
            t for line in raw.decode().splitlines()
            if not line.startswith("#")
            for t in line.split()
        ]
        w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
        pix = np.array(tokens[4 : 4 + w * h], dtype=np.float64).reshape(h, w)
    else:
        raise ValueError(f"not a PGM file: {path}")
    return (pix / float(maxval)).astype(np.float64)[None, None]
