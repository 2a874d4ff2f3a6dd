"""Spiking network core: LIF dynamics, hybrid-activation training, energy model.

Hidden neurons follow the leaky integrate-and-fire recurrence

    U[t] = beta * U[t-1] + W X[t] - S[t-1] * theta,   S[t] = 1 iff U[t] > theta

with subtract reset. During training the spike nonlinearity is the hybrid
activation: the forward value mixes the sigmoid surrogate H and the
Heaviside step under a Bernoulli mask, while the backward pass always sees
the surrogate derivative (the masked binary part carries no gradient). In
inference mode the binary activation is recovered so all inter-layer
traffic is 0/1 spikes. The reset term is treated as a constant for the
gradient.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .errors import ConfigurationError

MAC_ENERGY_PJ = 4.6  # energy per multiply-accumulate (45nm CMOS)
AC_ENERGY_PJ = 0.9  # energy per accumulate


@dataclass(frozen=True)
class EnergyModel:
    mac_energy_pj: float = MAC_ENERGY_PJ
    ac_energy_pj: float = AC_ENERGY_PJ

    def __post_init__(self):
        if self.mac_energy_pj <= 0 or self.ac_energy_pj <= 0:
            raise ConfigurationError("per-operation energies must be > 0")


@dataclass(frozen=True)
class LifParams:
    decay: float = 0.9
    threshold: float = 1.0
    timesteps: int = 3

    def __post_init__(self):
        if not 0.0 <= self.decay <= 1.0:
            raise ConfigurationError("decay must lie in [0, 1]")
        if self.threshold <= 0:
            raise ConfigurationError("threshold must be > 0")
        if self.timesteps < 1:
            raise ConfigurationError("timesteps must be >= 1")


@dataclass(frozen=True)
class HybridActivationConfig:
    alpha_init: float = 0.2
    mask_prob: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.alpha_init <= 0:
            raise ConfigurationError("surrogate width alpha must be > 0")
        if not 0.0 < self.mask_prob <= 1.0:
            raise ConfigurationError("mask probability must lie in (0, 1]")


@dataclass(frozen=True)
class LayerSpec:
    """Hidden layer: dense(width) or conv(out_channels, kernel)."""

    kind: str
    width: int
    kernel: int = 3

    def __post_init__(self):
        if self.kind not in ("dense", "conv"):
            raise ConfigurationError(f"unknown layer kind {self.kind!r}")
        if self.width < 1 or self.kernel < 1:
            raise ConfigurationError("layer width/kernel must be >= 1")


def lif_step(
    u_prev: torch.Tensor,
    weighted_input: torch.Tensor,
    s_prev: torch.Tensor,
    params: LifParams,
) -> tuple[torch.Tensor, torch.Tensor]:
    """One membrane update and spike emission (strict threshold crossing)."""
    if u_prev.shape != weighted_input.shape or u_prev.shape != s_prev.shape:
        raise ValueError("membrane, input and spike shapes must agree")
    u = params.decay * u_prev + weighted_input - s_prev * params.threshold
    s = (u > params.threshold).to(u.dtype)
    return u, s


class _HybridSpike(torch.autograd.Function):
    """Forward: Heaviside where the mask is set, surrogate elsewhere.

    Backward: the surrogate derivative everywhere, for both the membrane
    potential and the trainable width alpha; the mask never touches the
    gradient.
    """

    @staticmethod
    def forward(ctx, u, alpha, mask, threshold):
        z = alpha * (u - threshold)
        h = torch.sigmoid(z)
        binary = (u > threshold).to(u.dtype)
        out = torch.where(mask.bool(), binary, h)
        ctx.save_for_backward(u, alpha, h)
        ctx.threshold = threshold
        return out

    @staticmethod
    def backward(ctx, grad_out):
        u, alpha, h = ctx.saved_tensors
        sig_prime = h * (1.0 - h)
        grad_u = grad_out * alpha * sig_prime
        grad_alpha = (grad_out * (u - ctx.threshold) * sig_prime).sum().reshape(alpha.shape)
        return grad_u, grad_alpha, None, None


def hybrid_forward(
    u: torch.Tensor,
    mask: torch.Tensor,
    alpha: torch.Tensor | float,
    threshold: float = 1.0,
) -> torch.Tensor:
    """Hybrid activation S~ = H(U) + m * detach(step(U) - H(U))."""
    if mask.shape != u.shape:
        raise ValueError("mask shape must match the membrane shape")
    if not torch.is_tensor(alpha):
        alpha = torch.tensor(float(alpha), dtype=u.dtype)
    return _HybridSpike.apply(u, alpha, mask, float(threshold))


@dataclass
class SpikeRecord:
    """Mean activation per hidden layer plus the input-train rate."""

    input_rate: float
    layer_rates: list[float] = field(default_factory=list)

    def all_rates(self) -> list[float]:
        """Input rate for layer 0, then each hidden layer's output rate."""
        return [self.input_rate] + list(self.layer_rates)


class SpikingNet(nn.Module):
    """Layered LIF network with a non-spiking integrator readout.

    `input_shape` is either (features,) for dense stacks or (channels, h, w)
    when the stack starts with conv layers. Mode is "training-hybrid" or
    "inference-binary".
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
        super().__init__()
        self.input_shape = tuple(input_shape)
        self.layer_specs = list(layers)
        self.n_classes = n_classes
        self.lif = lif
        self.hybrid = hybrid
        self.mode = "training-hybrid"
        self._mask_generator = torch.Generator().manual_seed(hybrid.seed)

        gen = torch.Generator().manual_seed(init_seed)
        self.linears = nn.ModuleList()
        self.alphas = nn.ParameterList()
        shape = self.input_shape
        for spec in layers:
            if spec.kind == "conv":
                if len(shape) != 3:
                    raise ConfigurationError("conv layer needs (channels, h, w) input")
                mod = nn.Conv2d(shape[0], spec.width, spec.kernel, dtype=torch.float64)
                shape = (spec.width, shape[1] - spec.kernel + 1, shape[2] - spec.kernel + 1)
            else:
                mod = nn.Linear(int(np.prod(shape)), spec.width, dtype=torch.float64)
                shape = (spec.width,)
            self._init_module(mod, gen)
            self.linears.append(mod)
            self.alphas.append(
                nn.Parameter(torch.tensor(hybrid.alpha_init, dtype=torch.float64))
            )
        self.readout = nn.Linear(int(np.prod(shape)), n_classes, dtype=torch.float64)
        self._init_module(self.readout, gen)

    @staticmethod
    def _init_module(mod: nn.Module, gen: torch.Generator) -> None:
        fan_in = mod.weight.shape[1] if isinstance(mod, nn.Linear) else int(
            np.prod(mod.weight.shape[1:])
        )
        with torch.no_grad():
            mod.weight.normal_(0.0, 1.0 / math.sqrt(fan_in), generator=gen)
            mod.bias.zero_()

    def set_mode(self, mode: str) -> None:
        if mode not in ("training-hybrid", "inference-binary"):
            raise ConfigurationError(f"unknown mode {mode!r}")
        self.mode = mode

    def hidden_shapes(self) -> list[tuple[int, ...]]:
        """Activation shape (without batch) emitted by each hidden layer."""
        shapes = []
        shape = self.input_shape
        for spec in self.layer_specs:
            if spec.kind == "conv":
                shape = (spec.width, shape[1] - spec.kernel + 1, shape[2] - spec.kernel + 1)
            else:
                shape = (spec.width,)
            shapes.append(shape)
        return shapes

    def sample_masks(self, batch_size: int) -> list[list[torch.Tensor]]:
        """Bernoulli(p) masks for every (hidden layer, timestep)."""
        masks = []
        for shape in self.hidden_shapes():
            masks.append(
                [
                    (
                        torch.rand(
                            (batch_size,) + shape,
                            generator=self._mask_generator,
                            dtype=torch.float64,
                        )
                        < self.hybrid.mask_prob
                    ).to(torch.float64)
                    for _ in range(self.lif.timesteps)
                ]
            )
        return masks

    def ordered_parameters(self) -> list[nn.Parameter]:
        """Deterministic flattening order: (weight, bias, alpha) per layer, readout last."""
        params = []
        for mod, alpha in zip(self.linears, self.alphas):
            params.extend([mod.weight, mod.bias, alpha])
        params.extend([self.readout.weight, self.readout.bias])
        return params

    def forward(
        self,
        spike_train: torch.Tensor,
        masks: list[list[torch.Tensor]] | None = None,
    ) -> tuple[torch.Tensor, SpikeRecord]:
        if spike_train.shape[0] != self.lif.timesteps:
            raise ValueError(
                f"spike train has {spike_train.shape[0]} steps, expected {self.lif.timesteps}"
            )
        if tuple(spike_train.shape[2:]) != self.input_shape:
            raise ValueError(
                f"spike train feature shape {tuple(spike_train.shape[2:])} "
                f"does not match input shape {self.input_shape}"
            )
        batch = spike_train.shape[1]
        hybrid_mode = self.mode == "training-hybrid"
        if hybrid_mode and masks is None:
            masks = self.sample_masks(batch)

        theta = self.lif.threshold
        beta = self.lif.decay
        membranes: list[torch.Tensor | None] = [None] * len(self.linears)
        prev_spikes: list[torch.Tensor | None] = [None] * len(self.linears)
        readout_membrane = None
        readout_acc = None
        spike_sums = [0.0] * len(self.linears)
        spike_counts = [0] * len(self.linears)

        for t in range(self.lif.timesteps):
            x = spike_train[t]
            for l, (spec, mod, alpha) in enumerate(
                zip(self.layer_specs, self.linears, self.alphas)
            ):
                if spec.kind == "dense" and x.dim() > 2:
                    x = x.flatten(1)
                current = mod(x)
                u_prev = membranes[l]
                if u_prev is None:
                    u = current
                else:
                    reset = prev_spikes[l].detach() * theta
                    u = beta * u_prev + current - reset
                if hybrid_mode:
                    s = _HybridSpike.apply(u, alpha, masks[l][t], theta)
                else:
                    s = (u > theta).to(u.dtype)
                membranes[l] = u
                prev_spikes[l] = s
                spike_sums[l] += float(s.detach().sum())
                spike_counts[l] += s.numel()
                x = s
            if x.dim() > 2:
                x = x.flatten(1)
            current = self.readout(x)
            readout_membrane = (
                current if readout_membrane is None else beta * readout_membrane + current
            )
            readout_acc = (
                readout_membrane
                if readout_acc is None
                else readout_acc + readout_membrane
            )

        logits = readout_acc / self.lif.timesteps
        record = SpikeRecord(
            input_rate=float(spike_train.detach().mean()),
            layer_rates=[spike_sums[l] / spike_counts[l] for l in range(len(self.linears))],
        )
        return logits, record


def snn_forward(
    net: SpikingNet,
    spike_train: torch.Tensor,
    masks: list[list[torch.Tensor]] | None = None,
) -> tuple[torch.Tensor, SpikeRecord]:
    return net(spike_train, masks)


def snn_backward(
    net: SpikingNet,
    spike_train: torch.Tensor,
    labels: torch.Tensor,
    masks: list[list[torch.Tensor]] | None = None,
) -> tuple[float, np.ndarray, list[list[torch.Tensor]] | None]:
    """Cross-entropy BPTT pass; returns (loss, flat gradient, masks used)."""
    if net.mode != "training-hybrid":
        raise RuntimeError("snn_backward requires training-hybrid mode")
    if masks is None:
        masks = net.sample_masks(spike_train.shape[1])
    net.zero_grad()
    logits, _ = net(spike_train, masks)
    loss = F.cross_entropy(logits, labels)
    loss.backward()
    grads = np.concatenate(
        [
            (p.grad if p.grad is not None else torch.zeros_like(p)).detach().numpy().ravel()
            for p in net.ordered_parameters()
        ]
    )
    return float(loss.detach()), grads, masks


def params_vector(net: SpikingNet) -> np.ndarray:
    return np.concatenate([p.detach().numpy().ravel() for p in net.ordered_parameters()])


def set_params_vector(net: SpikingNet, vec: np.ndarray) -> None:
    vec = np.asarray(vec, dtype=np.float64)
    offset = 0
    with torch.no_grad():
        for p in net.ordered_parameters():
            n = p.numel()
            p.copy_(torch.from_numpy(vec[offset : offset + n].reshape(p.shape)))
            offset += n
    if offset != vec.size:
        raise ValueError(f"parameter vector length {vec.size} != model size {offset}")


def rate_encode(
    images: np.ndarray, timesteps: int, rng: np.random.Generator
) -> torch.Tensor:
    """Bernoulli rate coding: spike probability equals pixel intensity in [0, 1]."""
    x = np.asarray(images, dtype=np.float64)
    if x.min() < 0.0 or x.max() > 1.0:
        raise ValueError("rate coding expects intensities in [0, 1]")
    draws = rng.random((timesteps,) + x.shape)
    return torch.from_numpy((draws < x).astype(np.float64))


def measure_spike_rates(net: SpikingNet, spike_train: torch.Tensor) -> list[float]:
    """Per-layer input rates in inference-binary mode: [input, hidden_1, ...]."""
    mode = net.mode
    net.set_mode("inference-binary")
    with torch.no_grad():
        _, record = net(spike_train)
    net.set_mode(mode)
    return record.all_rates()


def layer_mac_counts(net: SpikingNet) -> list[tuple[str, int]]:
    """Multiply-accumulate count of each linear map for one input presentation."""
    counts = []
    shape = net.input_shape
    for idx, spec in enumerate(net.layer_specs):
        if spec.kind == "conv":
            out_shape = (spec.width, shape[1] - spec.kernel + 1, shape[2] - spec.kernel + 1)
            macs = out_shape[1] * out_shape[2] * spec.width * shape[0] * spec.kernel**2
            shape = out_shape
        else:
            macs = int(np.prod(shape)) * spec.width
            shape = (spec.width,)
        counts.append((f"{spec.kind}{idx}", macs))
    counts.append(("readout", int(np.prod(shape)) * net.n_classes))
    return counts


def estimate_energy(
    mac_counts: list[tuple[str, int]],
    rates: list[float] | None,
    timesteps: int,
    model_kind: str,
    energy: EnergyModel = EnergyModel(),
) -> tuple[list[tuple[str, float]], float]:
    """Joules per inference, per layer and total.

    ANN: macs * 4.6 pJ. SNN: macs * input_rate * timesteps * 0.9 pJ, since
    accumulates only fire on incoming spikes. `rates[l]` is the spiking rate
    of layer l's input.
    """
    if model_kind not in ("ann", "snn"):
        raise ConfigurationError(f"unknown model kind {model_kind!r}")
    per_layer = []
    if model_kind == "ann":
        for name, macs in mac_counts:
            per_layer.append((name, macs * energy.mac_energy_pj * 1e-12))
    else:
        if rates is None or len(rates) < len(mac_counts):
            raise ValueError(
                f"need one input rate per layer ({len(mac_counts)}), got "
                f"{0 if rates is None else len(rates)}"
            )
        for (name, macs), rate in zip(mac_counts, rates):
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"spiking rate {rate} outside [0, 1] for layer {name}")
            per_layer.append((name, macs * rate * timesteps * energy.ac_energy_pj * 1e-12))
    return per_layer, sum(e for _, e in per_layer)


def save_checkpoint(path_prefix, net: SpikingNet, spike_rates: list[float] | None = None) -> None:
    """Flat float64 parameter dump plus a JSON manifest with shapes and rates."""
    vec = params_vector(net)
    vec.tofile(str(path_prefix) + ".bin")
    manifest = {
        "dtype": "float64",
        "n_params": int(vec.size),
        "input_shape": list(net.input_shape),
        "layers": [
            {"kind": s.kind, "width": s.width, "kernel": s.kernel} for s in net.layer_specs
        ],
        "n_classes": net.n_classes,
        "lif": {
            "decay": net.lif.decay,
            "threshold": net.lif.threshold,
            "timesteps": net.lif.timesteps,
        },
        "hybrid": {
            "alpha_init": net.hybrid.alpha_init,
            "mask_prob": net.hybrid.mask_prob,
            "seed": net.hybrid.seed,
        },
        "spike_rates": spike_rates,
    }
    with open(str(path_prefix) + ".json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path_prefix) -> tuple[SpikingNet, list[float] | None]:
    with open(str(path_prefix) + ".json") as fh:
        manifest = json.load(fh)
    net = SpikingNet(
        input_shape=tuple(manifest["input_shape"]),
        layers=[LayerSpec(l["kind"], l["width"], l["kernel"]) for l in manifest["layers"]],
        n_classes=manifest["n_classes"],
        lif=LifParams(**manifest["lif"]),
        hybrid=HybridActivationConfig(**manifest["hybrid"]),
    )
    vec = np.fromfile(str(path_prefix) + ".bin", dtype=np.float64)
    set_params_vector(net, vec)
    return net, manifest.get("spike_rates")
