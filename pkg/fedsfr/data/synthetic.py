# SPDX-License-Identifier: Apache-2.0

"""Procedural image sets standing in for natural-image datasets at desk scale"""

from typing import Callable, Dict

import numpy as np

from fedsfr.data.dataset import ImageDataset
from fedsfr.exceptions import DegenerateInputError
from fedsfr.tensor import Shape, Tensor

MAX_BLOBS = 3


def _grid(height: int, width: int) -> "tuple[Tensor, Tensor]":
    ys, xs = np.meshgrid(np.linspace(0.0, 1.0, height), np.linspace(0.0, 1.0, width), indexing="ij")
    return ys, xs


def gaussian_blobs(rng: np.random.Generator, n: int, shape: Shape) -> Tensor:
    """Soft coloured blobs on a flat background"""
    channels, height, width = shape
    ys, xs = _grid(height, width)
    background = rng.uniform(0.1, 0.4, size=(n, channels, 1, 1))
    images = np.broadcast_to(background, (n, channels, height, width)).copy()
    for _ in range(MAX_BLOBS):
        cy, cx = rng.uniform(0.1, 0.9, size=(2, n, 1, 1))
        sigma = rng.uniform(0.08, 0.3, size=(n, 1, 1))
        colour = rng.uniform(0.0, 0.6, size=(n, channels, 1, 1))
        present = rng.random(size=(n, 1, 1, 1)) < 0.8
        blob = np.exp(-((ys - cy) ** 2 + (xs - cx) ** 2) / (2.0 * sigma**2))
        images += present * colour * blob[:, None, :, :]
    return np.clip(images, 0.0, 1.0)


def stripes(rng: np.random.Generator, n: int, shape: Shape) -> Tensor:
    """Oriented sinusoidal gratings"""
    channels, height, width = shape
    ys, xs = _grid(height, width)
    angle = rng.uniform(0.0, np.pi, size=(n, 1, 1))
    frequency = rng.uniform(1.0, 4.0, size=(n, 1, 1))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=(n, 1, 1))
    contrast = rng.uniform(0.2, 0.5, size=(n, channels, 1, 1))
    wave = np.sin(2.0 * np.pi * frequency * (xs * np.cos(angle) + ys * np.sin(angle)) + phase)
    return np.clip(0.5 + contrast * wave[:, None, :, :], 0.0, 1.0)


GENERATORS: Dict[str, Callable[[np.random.Generator, int, Shape], Tensor]] = {
    "gaussian-blobs": gaussian_blobs,
    "stripes": stripes,
}


def synth_dataset(rng: np.random.Generator, n: int, shape: Shape, kind: str) -> ImageDataset:
    if n <= 0:
        raise DegenerateInputError(f"Synthetic dataset needs at least one image, got n = {n}")
    if len(shape) != 3:
        raise ValueError(f"Image shape must be (C, H, W), got {shape}")
    if kind not in GENERATORS:
        raise ValueError(f"Unknown synthetic dataset kind {kind!r}, expected one of {sorted(GENERATORS)}")
    return ImageDataset.from_array(GENERATORS[kind](rng, n, tuple(shape)))
