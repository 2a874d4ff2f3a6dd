"""Non-IID data partitioning across orbit planes and satellites."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from .data import LabeledDataset


@dataclass
class OrbitShard:
    """One plane's slice of the dataset, split evenly across its satellites."""

    plane_index: int
    satellite_indices: list[np.ndarray]
    class_proportions: np.ndarray  # fraction of each class's samples on this plane


def dirichlet_partition(
    dataset: LabeledDataset,
    n_planes: int,
    satellites_per_plane: int,
    heterogeneity: float,
    seed: int,
    max_retries: int = 100,
) -> list[OrbitShard]:
    """Dirichlet(heterogeneity) split of every class across planes.

    Small concentration values produce extreme label skew. Within a plane,
    samples are spread round-robin across satellites (sizes differ by at
    most one). Draws leaving some satellite empty are rejected and redrawn
    up to `max_retries` times.
    """
    if heterogeneity <= 0:
        raise ConfigurationError("heterogeneity must be > 0")
    labels = dataset.y
    classes = np.unique(labels)

    for attempt in range(max_retries):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 404, attempt]))
        plane_pools: list[list[int]] = [[] for _ in range(n_planes)]
        proportions = np.zeros((n_planes, len(classes)))
        for c_idx, c in enumerate(classes):
            members = np.flatnonzero(labels == c)
            rng.shuffle(members)
            p = rng.dirichlet(np.full(n_planes, heterogeneity))
            counts = _largest_remainder(p, len(members))
            start = 0
            for plane, cnt in enumerate(counts):
                plane_pools[plane].extend(members[start : start + cnt].tolist())
                start += cnt
            proportions[:, c_idx] = counts / max(1, len(members))
        if all(len(pool) >= satellites_per_plane for pool in plane_pools):
            shards = []
            for plane, pool in enumerate(plane_pools):
                pool = np.asarray(sorted(pool), dtype=np.int64)
                rng.shuffle(pool)
                per_sat = [pool[k::satellites_per_plane] for k in range(satellites_per_plane)]
                shards.append(
                    OrbitShard(
                        plane_index=plane,
                        satellite_indices=per_sat,
                        class_proportions=proportions[plane],
                    )
                )
            return shards
    raise ConfigurationError(
        f"could not draw a partition giving every satellite a sample "
        f"in {max_retries} attempts (heterogeneity={heterogeneity})"
    )


def _largest_remainder(proportions: np.ndarray, total: int) -> np.ndarray:
    """Integer allocation matching `proportions` with exact total."""
    raw = proportions * total
    counts = np.floor(raw).astype(np.int64)
    short = total - counts.sum()
    if short > 0:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return counts
