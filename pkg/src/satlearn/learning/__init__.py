"""Decentralized training: partitioning, local SGD, engines, metrics."""

from .data import LabeledDataset, gaussian_blobs, mini_images, train_test_split
from .loop import (
    MetricsRecord,
    TaskBundle,
    TrainConfig,
    TrainResult,
    compute_metrics,
    local_sgd,
    ring_allreduce_mean,
    rng_for,
    train,
)
from .models import LinearSoftmaxModel, QuadraticModel, SpikingClassifier
from .partition import OrbitShard, dirichlet_partition
from .tasks import classification_task, quadratic_task

__all__ = [
    "LabeledDataset",
    "gaussian_blobs",
    "mini_images",
    "train_test_split",
    "MetricsRecord",
    "TaskBundle",
    "TrainConfig",
    "TrainResult",
    "compute_metrics",
    "local_sgd",
    "ring_allreduce_mean",
    "rng_for",
    "train",
    "LinearSoftmaxModel",
    "QuadraticModel",
    "SpikingClassifier",
    "OrbitShard",
    "dirichlet_partition",
    "classification_task",
    "quadratic_task",
]
