"""U-Net generator and PatchGAN discriminator on top of the numpy engine."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..engine import ops
from ..engine.ops import ParamInit, RunningStats
from ..engine.tensor import Tensor
from ..errors import ConfigError, ShapeError
from .specs import PatchGANSpec, UNetSpec

INIT_STD = 0.02
BN_EPS = 1e-5


@dataclass
class Network:
    """Named parameters plus batch-norm running statistics for one network."""

    spec: UNetSpec | PatchGANSpec
    params: dict[str, Tensor] = field(default_factory=dict)
    stats: dict[str, RunningStats] = field(default_factory=dict)

    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype

    def n_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        return {k: p.grad for k, p in self.params.items() if p.grad is not None}

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Flat name -> array view of parameters and running statistics."""
        out = {k: p.data for k, p in self.params.items()}
        for k, s in self.stats.items():
            out[f"{k}.running_mean"] = s.mean
            out[f"{k}.running_var"] = s.var
        return out

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        expected = self.state_arrays()
        missing = sorted(set(expected) - set(arrays))
        extra = sorted(set(arrays) - set(expected))
        if missing or extra:
            raise ConfigError(f"parameter names do not match spec (missing {missing[:3]}, unexpected {extra[:3]})")
        for k, arr in arrays.items():
            if arr.shape != expected[k].shape:
                raise ConfigError(f"parameter {k!r} has shape {arr.shape}, spec expects {expected[k].shape}")
        for k, p in self.params.items():
            p.data = np.array(arrays[k], dtype=p.dtype)
        for k, s in self.stats.items():
            s.mean = np.array(arrays[f"{k}.running_mean"], dtype=s.mean.dtype)
            s.var = np.array(arrays[f"{k}.running_var"], dtype=s.var.dtype)


def _add_conv(net: Network, init: ParamInit, name: str, cin: int, cout: int, k: int, transposed: bool = False) -> None:
    shape = (cin, cout, k, k) if transposed else (cout, cin, k, k)
    net.params[f"{name}.weight"] = init.normal(shape)
    net.params[f"{name}.bias"] = init.zeros((cout,))


def _add_bn(net: Network, init: ParamInit, name: str, c: int) -> None:
    net.params[f"{name}.gamma"] = init.normal((c,), mean=1.0)
    net.params[f"{name}.beta"] = init.zeros((c,))
    net.stats[name] = RunningStats.init(c, init.dtype)


def _encoder_has_bn(spec: UNetSpec, j: int) -> bool:
    # no norm on the first layer nor on the 1x1-capable bottleneck
    return 1 < j < spec.depth


def build_generator(spec: UNetSpec, seed: int = 0, dtype=np.float32) -> Network:
    """U-Net parameters drawn from N(0, 0.02); batch-norm gammas from N(1, 0.02)."""
    init = ParamInit(seed, INIT_STD, dtype)
    net = Network(spec)
    cin = spec.input_channels
    for j, width in enumerate(spec.encoder_widths, start=1):
        _add_conv(net, init, f"enc{j}", cin, width, spec.kernel)
        if _encoder_has_bn(spec, j):
            _add_bn(net, init, f"enc{j}.bn", width)
        cin = width
    dec_in = spec.decoder_input_channels()
    for k, width in enumerate(spec.decoder_widths, start=1):
        _add_conv(net, init, f"dec{k}", dec_in[k - 1], width, spec.kernel, transposed=True)
        _add_bn(net, init, f"dec{k}.bn", width)
    _add_conv(net, init, "out", dec_in[-1], spec.output_channels, spec.kernel, transposed=True)
    return net


def _bn(net: Network, name: str, x: Tensor, update_stats: bool) -> Tensor:
    # batch statistics in train and inference alike (per-instance at batch size 1)
    return ops.batch_norm(
        x,
        net.params[f"{name}.gamma"],
        net.params[f"{name}.beta"],
        BN_EPS,
        "train",
        net.stats[name] if update_stats else None,
    )


def layer_seed(seed, layer: int) -> np.random.SeedSequence:
    entropy = [int(s) for s in np.atleast_1d(seed)] + [layer]
    return np.random.SeedSequence(entropy)


def generator_forward(
    net: Network,
    condition: Tensor,
    mode: str = "train",
    seed=0,
    skip_scale: dict[int, float] | None = None,
) -> Tensor:
    """Map N x C x H x W condition channels to an N x 1 x H x W raster in (-1, 1).

    ``mode`` is ``train`` (updates batch-norm running statistics) or
    ``eval``. Dropout is the noise source, so it stays active in both modes
    and is seeded by ``seed``.
    ``skip_scale`` multiplies the encoder activation fed to a skip junction
    (keyed by encoder layer index) and exists for ablations.
    """
    spec: UNetSpec = net.spec
    if mode not in ("train", "eval"):
        raise ConfigError(f"unknown mode {mode!r}")
    if condition.ndim != 4 or condition.shape[1] != spec.input_channels:
        raise ShapeError(f"generator expects N x {spec.input_channels} x H x W, got {condition.shape}")
    spec.check_size(*condition.shape[2:])
    train = mode == "train"
    p = net.params
    pad = (spec.kernel - spec.stride) // 2

    skips: list[Tensor] = []
    x = condition
    for j in range(1, spec.depth + 1):
        x = ops.conv2d(x, p[f"enc{j}.weight"], p[f"enc{j}.bias"], spec.stride, pad)
        if _encoder_has_bn(spec, j):
            x = _bn(net, f"enc{j}.bn", x, train)
        x = ops.leaky_relu(x) if j < spec.depth else ops.relu(x)
        skips.append(x)

    for k in range(1, spec.depth):
        x = ops.conv_transpose2d(x, p[f"dec{k}.weight"], p[f"dec{k}.bias"], spec.stride, pad)
        x = _bn(net, f"dec{k}.bn", x, train)
        if k in spec.dropout_layers:
            x = ops.dropout(x, spec.dropout_rate, layer_seed(seed, k), mode)
        x = ops.relu(x)
        enc_idx = spec.depth - k
        skip = skips[enc_idx - 1]
        if skip_scale and enc_idx in skip_scale:
            skip = skip * skip_scale[enc_idx]
        x = ops.concat_channels(x, skip)

    x = ops.conv_transpose2d(x, p["out.weight"], p["out.bias"], spec.stride, pad)
    return ops.tanh(x)


def build_discriminator(spec: PatchGANSpec, seed: int = 0, dtype=np.float32) -> Network:
    init = ParamInit(seed, INIT_STD, dtype)
    net = Network(spec)
    cin = spec.input_channels
    for i, (width, bn) in enumerate(zip(spec.widths, spec.batch_norm), start=1):
        _add_conv(net, init, f"layer{i}", cin, width, spec.kernel)
        if bn:
            _add_bn(net, init, f"layer{i}.bn", width)
        cin = width
    return net


def discriminator_forward(net: Network, condition: Tensor, candidate: Tensor, mode: str = "train") -> Tensor:
    """Per-patch real/fake probabilities for (condition, candidate) pairs."""
    spec: PatchGANSpec = net.spec
    if condition.ndim != 4 or candidate.ndim != 4:
        raise ShapeError("discriminator inputs must be N x C x H x W")
    if condition.shape[0] != candidate.shape[0] or condition.shape[2:] != candidate.shape[2:]:
        raise ShapeError(f"condition {condition.shape} and candidate {candidate.shape} are not aligned")
    x = ops.concat_channels(condition, candidate)
    if x.shape[1] != spec.input_channels:
        raise ShapeError(f"discriminator expects {spec.input_channels} channels, got {x.shape[1]}")
    train = mode == "train"
    p = net.params
    last = len(spec.widths)
    for i, (s, bn) in enumerate(zip(spec.strides, spec.batch_norm), start=1):
        x = ops.conv2d(x, p[f"layer{i}.weight"], p[f"layer{i}.bias"], s, spec.padding)
        if bn:
            x = _bn(net, f"layer{i}.bn", x, train)
        x = ops.leaky_relu(x) if i < last else ops.sigmoid(x)
    return x
