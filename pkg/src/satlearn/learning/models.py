"""Local models trained on satellite shards.

Every model exposes the same small surface: flat float64 parameter get/set,
minibatch SGD epochs driven by a per-satellite RNG, and full-dataset
loss/gradient/accuracy used by the metrics. Spiking models evaluate loss
and gradients on a fixed encoding stream with the pure surrogate path
(masks off) so the reported curves are deterministic; accuracy uses binary
inference, the deployed behavior.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F

from ..errors import NumericalError
from ..snn import (
    HybridActivationConfig,
    LayerSpec,
    LifParams,
    SpikingNet,
    params_vector,
    rate_encode,
    set_params_vector,
)
from .data import LabeledDataset

EVAL_ENCODING_SEED = 9191  # fixed stream so metric evaluations are reproducible


class QuadraticModel:
    """f(x) = mean over targets a of 0.5 * ||x - a||^2; data = target rows."""

    def __init__(self, dim: int):
        self.x = np.zeros(dim)

    def get_params(self) -> np.ndarray:
        return self.x.copy()

    def set_params(self, vec: np.ndarray) -> None:
        self.x = np.asarray(vec, dtype=np.float64).copy()

    @staticmethod
    def _targets(data) -> np.ndarray:
        a = np.asarray(data, dtype=np.float64)
        return a.reshape(1, -1) if a.ndim == 1 else a

    def run_local_epochs(self, data, epochs: int, lr: float, batch_size: int, rng) -> None:
        center = self._targets(data).mean(axis=0)
        for _ in range(epochs):
            self.x = self.x - lr * (self.x - center)

    def dataset_loss(self, data) -> float:
        a = self._targets(data)
        return float(0.5 * ((self.x - a) ** 2).sum(axis=1).mean())

    def dataset_gradient(self, data) -> np.ndarray:
        return self.x - self._targets(data).mean(axis=0)

    def dataset_accuracy(self, data):
        return None


class LinearSoftmaxModel:
    """Multinomial logistic regression trained with minibatch SGD."""

    def __init__(self, n_features: int, n_classes: int, init_seed: int = 0):
        rng = np.random.default_rng(np.random.SeedSequence([init_seed, 505]))
        self.w = rng.normal(0.0, 0.01, size=(n_classes, n_features))
        self.b = np.zeros(n_classes)

    def get_params(self) -> np.ndarray:
        return np.concatenate([self.w.ravel(), self.b])

    def set_params(self, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=np.float64)
        n = self.w.size
        self.w = vec[:n].reshape(self.w.shape).copy()
        self.b = vec[n:].copy()

    @staticmethod
    def _features(data: LabeledDataset) -> np.ndarray:
        x = data.x
        return x.reshape(len(data), -1) if x.ndim > 2 else x

    def _logits(self, x: np.ndarray) -> np.ndarray:
        return x @ self.w.T + self.b

    def _loss_grad(self, x: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        logits = self._logits(x)
        logits -= logits.max(axis=1, keepdims=True)
        expz = np.exp(logits)
        probs = expz / expz.sum(axis=1, keepdims=True)
        n = x.shape[0]
        loss = float(-np.log(probs[np.arange(n), y] + 1e-300).mean())
        delta = probs
        delta[np.arange(n), y] -= 1.0
        delta /= n
        return loss, delta.T @ x, delta.sum(axis=0)

    def run_local_epochs(self, data: LabeledDataset, epochs, lr, batch_size, rng) -> None:
        x = self._features(data)
        for _ in range(epochs):
            order = rng.permutation(len(data))
            for start in range(0, len(order), batch_size):
                idx = order[start : start + batch_size]
                _, gw, gb = self._loss_grad(x[idx], data.y[idx])
                self.w -= lr * gw
                self.b -= lr * gb

    def dataset_loss(self, data: LabeledDataset) -> float:
        loss, _, _ = self._loss_grad(self._features(data), data.y)
        return loss

    def dataset_gradient(self, data: LabeledDataset) -> np.ndarray:
        _, gw, gb = self._loss_grad(self._features(data), data.y)
        return np.concatenate([gw.ravel(), gb])

    def dataset_accuracy(self, data: LabeledDataset) -> float:
        pred = self._logits(self._features(data)).argmax(axis=1)
        return float((pred == data.y).mean())


class SpikingClassifier:
    """SpikingNet wrapper speaking the flat-parameter local-model protocol.

    All stochasticity in a local training step (rate coding and activation
    masks) is drawn from the caller's numpy RNG, so per-satellite streams
    stay independent of execution order.
    """

    def __init__(
        self,
        input_shape: tuple[int, ...],
        layers: list[LayerSpec],
        n_classes: int,
        lif: LifParams = LifParams(),
        hybrid: HybridActivationConfig = HybridActivationConfig(),
        init_seed: int = 0,
    ):
        self.net = SpikingNet(
            input_shape=input_shape,
            layers=layers,
            n_classes=n_classes,
            lif=lif,
            hybrid=hybrid,
            init_seed=init_seed,
        )

    def get_params(self) -> np.ndarray:
        return params_vector(self.net)

    def set_params(self, vec: np.ndarray) -> None:
        set_params_vector(self.net, vec)

    def _masks_from_rng(self, batch: int, rng, zero: bool = False) -> list[list[torch.Tensor]]:
        masks = []
        p = self.net.hybrid.mask_prob
        for shape in self.net.hidden_shapes():
            per_layer = []
            for _ in range(self.net.lif.timesteps):
                if zero:
                    m = np.zeros((batch,) + shape)
                else:
                    m = (rng.random((batch,) + shape) < p).astype(np.float64)
                per_layer.append(torch.from_numpy(m))
            masks.append(per_layer)
        return masks

    def run_local_epochs(self, data: LabeledDataset, epochs, lr, batch_size, rng) -> None:
        self.net.set_mode("training-hybrid")
        for _ in range(epochs):
            order = rng.permutation(len(data))
            for start in range(0, len(order), batch_size):
                idx = order[start : start + batch_size]
                spikes = rate_encode(data.x[idx], self.net.lif.timesteps, rng)
                masks = self._masks_from_rng(len(idx), rng)
                labels = torch.from_numpy(data.y[idx])
                self.net.zero_grad()
                logits, _ = self.net(spikes, masks)
                loss = F.cross_entropy(logits, labels)
                loss.backward()
                with torch.no_grad():
                    for p in self.net.ordered_parameters():
                        if p.grad is not None:
                            p -= lr * p.grad

    def _eval_spikes(self, data: LabeledDataset) -> torch.Tensor:
        rng = np.random.default_rng(np.random.SeedSequence([EVAL_ENCODING_SEED, len(data)]))
        return rate_encode(data.x, self.net.lif.timesteps, rng)

    def dataset_loss(self, data: LabeledDataset) -> float:
        self.net.set_mode("training-hybrid")
        spikes = self._eval_spikes(data)
        masks = self._masks_from_rng(len(data), None, zero=True)
        with torch.no_grad():
            logits, _ = self.net(spikes, masks)
            return float(F.cross_entropy(logits, torch.from_numpy(data.y)))

    def dataset_gradient(self, data: LabeledDataset) -> np.ndarray:
        self.net.set_mode("training-hybrid")
        spikes = self._eval_spikes(data)
        masks = self._masks_from_rng(len(data), None, zero=True)
        self.net.zero_grad()
        logits, _ = self.net(spikes, masks)
        loss = F.cross_entropy(logits, torch.from_numpy(data.y))
        loss.backward()
        return np.concatenate(
            [
                (p.grad if p.grad is not None else torch.zeros_like(p)).detach().numpy().ravel()
                for p in self.net.ordered_parameters()
            ]
        )

    def dataset_accuracy(self, data: LabeledDataset) -> float:
        self.net.set_mode("inference-binary")
        with torch.no_grad():
            logits, _ = self.net(self._eval_spikes(data))
        self.net.set_mode("training-hybrid")
        pred = logits.argmax(dim=1).numpy()
        return float((pred == data.y).mean())


def check_finite(params: np.ndarray, context: str) -> None:
    if not np.isfinite(params).all():
        raise NumericalError(f"non-finite model parameters after {context}")
