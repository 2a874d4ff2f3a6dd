"""Task bundles: model factories plus partitioned shards for the train loop."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from ..snn import HybridActivationConfig, LayerSpec, LifParams
from .data import LabeledDataset, gaussian_blobs, mini_images, train_test_split
from .loop import TaskBundle, rng_for
from .models import LinearSoftmaxModel, QuadraticModel, SpikingClassifier
from .partition import dirichlet_partition


def quadratic_task(
    n_planes: int,
    satellites_per_plane: int,
    dim: int = 1,
    plane_spread: float = 1.0,
    jitter: float = 0.0,
    offset: float = 0.0,
    seed: int = 0,
) -> TaskBundle:
    """Per-satellite quadratics 0.5*||x - a||^2 with plane-separated targets.

    Plane centers sit at offset + plane_spread * (i - (N-1)/2) in every
    coordinate; per-satellite jitter adds intra-plane dissimilarity. The
    optimum and optimal value are closed-form. A nonzero offset keeps the
    zero-initialized model away from the optimum.
    """
    rng = rng_for(seed, 606)
    targets = np.empty((n_planes, satellites_per_plane, dim))
    for i in range(n_planes):
        center = offset + plane_spread * (i - (n_planes - 1) / 2.0)
        targets[i] = center + jitter * rng.normal(size=(satellites_per_plane, dim))
    flat = targets.reshape(-1, dim)
    optimum = flat.mean(axis=0)
    f_star = float(0.5 * ((flat - optimum) ** 2).sum(axis=1).mean())
    return TaskBundle(
        model_factory=lambda: QuadraticModel(dim),
        shard_data=[[targets[i, k] for k in range(satellites_per_plane)] for i in range(n_planes)],
        train_eval_data=flat,
        test_eval_data=None,
        f_star=f_star,
        name="quadratic",
    )


def classification_task(
    model_kind: str,
    n_planes: int,
    satellites_per_plane: int,
    heterogeneity: float,
    seed: int,
    n_train: int = 600,
    n_test: int = 200,
    n_classes: int = 4,
    n_features: int = 8,
    image_size: int = 16,
    hidden: tuple[int, ...] = (40,),
    conv_channels: tuple[int, ...] = (4, 8),
    kernel: int = 3,
    dense_after_conv: int = 32,
    lif: LifParams = LifParams(),
    hybrid: HybridActivationConfig = HybridActivationConfig(),
) -> TaskBundle:
    """Dirichlet-partitioned classification on synthetic desk-scale data."""
    total = n_train + n_test
    if model_kind == "linear-softmax":
        full = gaussian_blobs(total, n_classes=n_classes, n_features=n_features, seed=seed)
    elif model_kind in ("spiking-mlp", "spiking-cnn"):
        full = mini_images(total, n_classes=n_classes, size=image_size, seed=seed)
    else:
        raise ConfigurationError(f"no classification task for model kind {model_kind!r}")
    train_data, test_data = train_test_split(full, n_test / total, seed)
    if model_kind == "spiking-cnn":
        train_data = LabeledDataset(train_data.x[:, None, :, :], train_data.y)
        test_data = LabeledDataset(test_data.x[:, None, :, :], test_data.y)

    shards = dirichlet_partition(train_data, n_planes, satellites_per_plane, heterogeneity, seed)
    shard_data = [
        [train_data.subset(shard.satellite_indices[k]) for k in range(satellites_per_plane)]
        for shard in shards
    ]

    if model_kind == "linear-softmax":
        feat = int(np.prod(train_data.x.shape[1:]))

        def factory():
            return LinearSoftmaxModel(feat, n_classes, init_seed=seed)

    else:
        if model_kind == "spiking-mlp":
            input_shape = train_data.x.shape[1:]
            layers = [LayerSpec("dense", w) for w in hidden]
        else:
            input_shape = train_data.x.shape[1:]
            layers = [LayerSpec("conv", c, kernel) for c in conv_channels]
            layers.append(LayerSpec("dense", dense_after_conv))

        def factory():
            return SpikingClassifier(
                input_shape=input_shape,
                layers=layers,
                n_classes=n_classes,
                lif=lif,
                hybrid=hybrid,
                init_seed=seed,
            )

    return TaskBundle(
        model_factory=factory,
        shard_data=shard_data,
        train_eval_data=train_data,
        test_eval_data=test_data,
        f_star=None,
        name=model_kind,
    )
