"""Desk-scale synthetic datasets standing in for full remote-sensing corpora."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    x: np.ndarray  # features: (n, f) or images (n, h, w)
    y: np.ndarray  # int labels (n,)

    def __post_init__(self):
        if self.x.shape[0] != self.y.shape[0]:
            raise ConfigurationError("feature/label counts differ")

    def __len__(self) -> int:
        return self.x.shape[0]

    def subset(self, indices: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(self.x[indices], self.y[indices])


def gaussian_blobs(
    n_samples: int,
    n_classes: int = 4,
    n_features: int = 8,
    spread: float = 1.0,
    seed: int = 0,
) -> LabeledDataset:
    """Gaussian mixture classification data with unit-spaced class centers."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 101]))
    centers = rng.normal(0.0, 2.0, size=(n_classes, n_features))
    y = rng.integers(0, n_classes, size=n_samples)
    x = centers[y] + rng.normal(0.0, spread, size=(n_samples, n_features))
    return LabeledDataset(x.astype(np.float64), y.astype(np.int64))


def mini_images(
    n_samples: int,
    n_classes: int = 4,
    size: int = 16,
    noise: float = 0.15,
    seed: int = 0,
) -> LabeledDataset:
    """Procedural 16x16 grayscale texture classes (stripes, checks, blobs).

    Intensities are clipped to [0, 1] so images can be rate-coded directly.
    """
    if n_classes > 4:
        raise ConfigurationError("mini_images provides at most 4 texture classes")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 202]))
    rows = np.arange(size)[:, None]
    cols = np.arange(size)[None, :]
    y = rng.integers(0, n_classes, size=n_samples)
    x = np.empty((n_samples, size, size))
    for idx in range(n_samples):
        phase = rng.uniform(0, 2 * np.pi)
        freq = rng.uniform(0.5, 1.5)
        cls = y[idx]
        if cls == 0:  # horizontal stripes
            img = 0.5 + 0.5 * np.sin(freq * rows * np.pi / 3 + phase) * np.ones_like(cols, dtype=float)
        elif cls == 1:  # vertical stripes
            img = 0.5 + 0.5 * np.sin(freq * cols * np.pi / 3 + phase) * np.ones_like(rows, dtype=float)
        elif cls == 2:  # checkerboard
            img = 0.5 + 0.5 * np.sin(freq * rows * np.pi / 3 + phase) * np.sin(
                freq * cols * np.pi / 3 + phase
            )
        else:  # centered blob
            cx, cy = rng.uniform(4, size - 4, size=2)
            r2 = (rows - cy) ** 2 + (cols - cx) ** 2
            img = np.exp(-r2 / rng.uniform(6.0, 18.0))
        img = img + rng.normal(0.0, noise, size=(size, size))
        x[idx] = np.clip(img, 0.0, 1.0)
    return LabeledDataset(x.astype(np.float64), y.astype(np.int64))


def train_test_split(data: LabeledDataset, test_fraction: float, seed: int) -> tuple[LabeledDataset, LabeledDataset]:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 303]))
    order = rng.permutation(len(data))
    n_test = int(len(data) * test_fraction)
    return data.subset(order[n_test:]), data.subset(order[:n_test])
