"""Decentralized training orchestration: local SGD, intra-plane ring
all-reduce rounds, one inter-plane engine exchange per global iteration,
and the per-iteration convergence metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..aggregation import (
    MixingMatrices,
    allreduce_tree,
    build_mixing_matrices,
    gossip_round,
    init_relay_states,
    messages_per_round,
    metropolis_weights,
    relaysum_round,
)
from ..errors import ConfigurationError, NumericalError
from ..treeopt import RoutingTree

ENGINES = ("relaysum", "gossip", "allreduce")
MODEL_KINDS = ("quadratic", "linear-softmax", "spiking-mlp", "spiking-cnn")


@dataclass
class TrainConfig:
    learning_rate: float
    local_epochs: int = 1
    intra_rounds: int = 1
    iterations: int = 10
    engine: str = "relaysum"
    model: str = "quadratic"
    heterogeneity: float = 1.0
    batch_size: int = 32
    seed: int = 0
    round_budget: int | None = None
    checkpoint_every: int = 0
    analyze_mixing: bool = True
    grad_metric: bool = True
    keep_history: bool = False  # retain per-iteration plane models (tests, debugging)

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be > 0")
        if min(self.local_epochs, self.intra_rounds, self.iterations) < 1:
            raise ConfigurationError("local_epochs, intra_rounds, iterations must be >= 1")
        if self.heterogeneity <= 0:
            raise ConfigurationError("heterogeneity must be > 0")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.engine not in ENGINES:
            raise ConfigurationError(f"unknown engine {self.engine!r}")
        if self.model not in MODEL_KINDS:
            raise ConfigurationError(f"unknown model kind {self.model!r}")


@dataclass
class MetricsRecord:
    iteration: int
    rounds: int
    messages: int
    bytes_sent: int
    train_loss: float
    test_accuracy: float | None
    consensus_distance: float | None  # pi-weighted over the stacked history
    consensus_distance_plain: float
    grad_norm_sq: float | None
    suboptimality: float | None  # f(mean model) - f*
    suboptimality_node_mean: float | None  # mean_i f(x_i) - f*: deployed-model view
    f_star_known: bool

    def to_json_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "rounds": self.rounds,
            "messages": self.messages,
            "bytes_sent": self.bytes_sent,
            "train_loss": self.train_loss,
            "test_accuracy": self.test_accuracy,
            "consensus_distance": self.consensus_distance,
            "consensus_distance_plain": self.consensus_distance_plain,
            "grad_norm_sq": self.grad_norm_sq,
            "suboptimality": self.suboptimality,
            "suboptimality_node_mean": self.suboptimality_node_mean,
            "f_star_known": self.f_star_known,
        }


@dataclass
class TaskBundle:
    """Everything train() needs besides the tree: models, shards, evaluators."""

    model_factory: Callable
    shard_data: list[list]  # [plane][satellite] -> data consumed by the model
    train_eval_data: object
    test_eval_data: object | None = None
    f_star: float | None = None
    name: str = "task"


@dataclass
class TrainResult:
    records: list[MetricsRecord]
    plane_models: list[np.ndarray]
    mean_model: np.ndarray
    checkpoints: dict[int, np.ndarray] = field(default_factory=dict)
    model_history: list[np.ndarray] = field(default_factory=list)  # (N, d) per iteration


def rng_for(seed: int, *path: int) -> np.random.Generator:
    """Independent stream keyed by (seed, path...) so order cannot matter."""
    return np.random.default_rng(np.random.SeedSequence([seed, *path]))


def ring_allreduce_mean(models: list[np.ndarray]) -> np.ndarray:
    """Mean via the bandwidth-optimal ring schedule over K parameter segments.

    Reduce-scatter (K-1 steps) then all-gather (K-1 steps); every node sends
    2(K-1) segments. All nodes finish with byte-identical results, so the
    shared vector is returned once.
    """
    k = len(models)
    if k == 0:
        raise ValueError("no models to aggregate")
    x = [np.asarray(m, dtype=np.float64).copy() for m in models]
    if k == 1:
        return x[0]
    dim = x[0].shape[0]
    for m in x:
        if m.shape != (dim,):
            raise ValueError("model shapes differ in ring all-reduce")
    bounds = np.linspace(0, dim, k + 1).astype(int)
    segs = [slice(bounds[i], bounds[i + 1]) for i in range(k)]

    for step in range(k - 1):
        outgoing = [(src, (src + 1) % k, (src - step) % k) for src in range(k)]
        payload = [x[src][segs[s]].copy() for src, _, s in outgoing]
        for (_, dst, s), data in zip(outgoing, payload):
            x[dst][segs[s]] += data
    for step in range(k - 1):
        outgoing = [(src, (src + 1) % k, (src + 1 - step) % k) for src in range(k)]
        payload = [x[src][segs[s]].copy() for src, _, s in outgoing]
        for (_, dst, s), data in zip(outgoing, payload):
            x[dst][segs[s]] = data
    return x[0] / k


def local_sgd(model, data, epochs: int, lr: float, batch_size: int, rng, context: str = "local step") -> np.ndarray:
    """Run E epochs of minibatch SGD on the satellite shard; NaN-guarded."""
    model.run_local_epochs(data, epochs, lr, batch_size, rng)
    params = model.get_params()
    if not np.isfinite(params).all():
        raise NumericalError(f"non-finite parameters after {context}")
    return params


def compute_metrics(
    plane_models: list[np.ndarray],
    history: list[np.ndarray],
    mixing: MixingMatrices | None,
    loss_fn: Callable[[np.ndarray], float],
    grad_fn: Callable[[np.ndarray], np.ndarray] | None,
    accuracy_fn: Callable[[np.ndarray], float | None] | None,
    f_star: float | None,
) -> dict:
    """Suboptimality, consensus distance, and gradient norm at the mean model.

    `history` is the stacked window [X^t, X^{t-1}, ..., X^{t-tau_max}]. The
    consensus distance uses the pi-weighted mean when the mixing analysis is
    available and the plain node mean otherwise; the plain variant is always
    emitted alongside.
    """
    x = np.stack(plane_models)
    n = x.shape[0]
    x_bar = x.mean(axis=0)
    theta_plain = float(((x - x_bar) ** 2).sum() / n)

    theta_pi = None
    if mixing is not None:
        y = np.concatenate(history, axis=0)
        x_bar_pi = y.T @ mixing.pi
        theta_pi = float(((y - x_bar_pi) ** 2).sum() / n)

    loss = loss_fn(x_bar)
    grad_sq = None
    if grad_fn is not None:
        g = grad_fn(x_bar)
        grad_sq = float((g * g).sum())
    accuracy = accuracy_fn(x_bar) if accuracy_fn is not None else None
    subopt = None
    subopt_nodes = None
    if f_star is not None:
        subopt = loss - f_star
        # what the constellation actually deploys: each plane its own model
        subopt_nodes = float(np.mean([loss_fn(m) for m in plane_models])) - f_star
    return {
        "train_loss": loss,
        "test_accuracy": accuracy,
        "consensus_distance": theta_pi,
        "consensus_distance_plain": theta_plain,
        "grad_norm_sq": grad_sq,
        "suboptimality": subopt,
        "suboptimality_node_mean": subopt_nodes,
        "f_star_known": f_star is not None,
    }


def train(
    task: TaskBundle,
    config: TrainConfig,
    tree: RoutingTree,
    record_sink: Callable[[MetricsRecord], None] | None = None,
) -> TrainResult:
    """Run the full decentralized loop and emit one MetricsRecord per iteration.

    `record_sink`, when given, receives each record as soon as it is computed
    so callers can stream metrics to disk and keep partial output on aborts.
    """
    n = tree.n_vertices
    if len(task.shard_data) != n:
        raise ConfigurationError(
            f"task has shards for {len(task.shard_data)} planes, tree has {n}"
        )
    k = len(task.shard_data[0])

    model = task.model_factory()
    x0 = model.get_params()
    dim = x0.shape[0]
    plane_models = [x0.copy() for _ in range(n)]

    mixing = build_mixing_matrices(tree) if config.analyze_mixing else None
    history = [np.tile(x0, (n, 1)) for _ in range(tree.tau_max + 1)]

    relay_states = init_relay_states(tree, x0) if config.engine == "relaysum" else None
    gossip_matrix = metropolis_weights(tree) if config.engine == "gossip" else None
    per_iter_rounds = 1 if config.engine in ("relaysum", "gossip") else 2 * tree.hop_diameter

    def loss_at(vec: np.ndarray) -> float:
        model.set_params(vec)
        return model.dataset_loss(task.train_eval_data)

    def grad_at(vec: np.ndarray) -> np.ndarray:
        model.set_params(vec)
        return model.dataset_gradient(task.train_eval_data)

    def acc_at(vec: np.ndarray):
        if task.test_eval_data is None:
            return None
        model.set_params(vec)
        return model.dataset_accuracy(task.test_eval_data)

    rounds = 0
    messages = 0
    records: list[MetricsRecord] = []
    checkpoints: dict[int, np.ndarray] = {}
    model_history: list[np.ndarray] = []

    for t in range(config.iterations):
        if config.round_budget is not None and rounds + per_iter_rounds > config.round_budget:
            break

        half_models: list[np.ndarray] = []
        for i in range(n):
            sat_models = [plane_models[i].copy() for _ in range(k)]
            for r in range(config.intra_rounds):
                for sat in range(k):
                    model.set_params(sat_models[sat])
                    sat_models[sat] = local_sgd(
                        model,
                        task.shard_data[i][sat],
                        config.local_epochs,
                        config.learning_rate,
                        config.batch_size,
                        rng_for(config.seed, 1, t, r, i, sat),
                        context=f"iteration {t}, round {r}, plane {i}, satellite {sat}",
                    )
                plane_mean = ring_allreduce_mean(sat_models)
                sat_models = [plane_mean.copy() for _ in range(k)]
            half_models.append(sat_models[0])

        if config.engine == "relaysum":
            relay_states = relaysum_round(relay_states, half_models, tree)
            plane_models = [st.model.copy() for st in relay_states]
            rounds += 1
        elif config.engine == "gossip":
            out = gossip_round(np.stack(half_models), gossip_matrix)
            plane_models = [out[i] for i in range(n)]
            rounds += 1
        else:
            out, used = allreduce_tree(np.stack(half_models), tree)
            plane_models = [out[i] for i in range(n)]
            rounds += used
        messages += messages_per_round(tree)

        history = [np.stack(plane_models)] + history[: tree.tau_max]
        if config.keep_history:
            model_history.append(np.stack(plane_models))

        metric_values = compute_metrics(
            plane_models,
            history,
            mixing,
            loss_at,
            grad_at if config.grad_metric else None,
            acc_at,
            task.f_star,
        )
        record = MetricsRecord(
            iteration=t,
            rounds=rounds,
            messages=messages,
            bytes_sent=messages * dim * 8,
            **metric_values,
        )
        records.append(record)
        if record_sink is not None:
            record_sink(record)
        if not np.isfinite(record.train_loss):
            raise NumericalError(
                f"non-finite training loss {record.train_loss} at iteration {t}"
            )
        if config.checkpoint_every and (t + 1) % config.checkpoint_every == 0:
            checkpoints[t] = np.stack(plane_models).mean(axis=0)

    mean_model = np.stack(plane_models).mean(axis=0)
    return TrainResult(
        records=records,
        plane_models=plane_models,
        mean_model=mean_model,
        checkpoints=checkpoints,
        model_history=model_history,
    )
