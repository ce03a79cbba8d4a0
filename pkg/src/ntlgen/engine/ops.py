"""Differentiable primitives for the translation networks.

Images use N x C x H x W layout. Convolution is cross-correlation (no kernel
flip). Convolutions go through an im2col view so the heavy lifting is one
matrix product per call.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ConfigError, DegenerateBatchError, NumericError, ShapeError
from .tensor import Tensor

LEAKY_SLOPE = 0.2
BN_MOMENTUM = 0.1


def _check_finite(x: np.ndarray, name: str) -> None:
    if not np.isfinite(x).all():
        raise NumericError(f"{name} contains non-finite values")


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def conv_transpose_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size - 1) * stride - 2 * padding + kernel


def _im2col(xpad: np.ndarray, kh: int, kw: int, stride: int, ho: int, wo: int) -> np.ndarray:
    """Patches of a padded N x C x H x W array as an (N*ho*wo, C*kh*kw) matrix."""
    n, c = xpad.shape[:2]
    win = sliding_window_view(xpad, (kh, kw), axis=(2, 3))
    win = win[:, :, : stride * (ho - 1) + 1 : stride, : stride * (wo - 1) + 1 : stride]
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * kh * kw)


def _col2im(cols: np.ndarray, n: int, c: int, hp: int, wp: int, kh: int, kw: int, stride: int, ho: int, wo: int) -> np.ndarray:
    """Scatter-add adjoint of ``_im2col`` into an N x C x hp x wp array."""
    cols = cols.reshape(n, ho, wo, c, kh, kw).transpose(0, 3, 4, 5, 1, 2)
    out = np.zeros((n, c, hp, wp), dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += cols[:, :, i, j]
    return out


def _pad(x: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))


def _crop(x: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return x
    return x[:, :, p:-p, p:-p]


def _check_conv_args(stride: int, padding: int) -> None:
    if stride < 1:
        raise ConfigError(f"stride must be positive, got {stride}")
    if padding < 0:
        raise ConfigError(f"padding must be non-negative, got {padding}")


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlate ``x`` (N x Cin x H x W) with ``kernel`` (Cout x Cin x kh x kw)."""
    _check_conv_args(stride, padding)
    if x.ndim != 4 or kernel.ndim != 4:
        raise ShapeError(f"conv2d expects 4-d input and kernel, got {x.shape} and {kernel.shape}")
    n, cin, h, w = x.shape
    cout, kcin, kh, kw = kernel.shape
    if kcin != cin:
        raise ShapeError(f"kernel expects {kcin} input channels, input has {cin}")
    if h + 2 * padding < kh or w + 2 * padding < kw:
        raise ShapeError(f"kernel {kh}x{kw} larger than padded input {h + 2 * padding}x{w + 2 * padding}")
    if bias is not None and bias.shape != (cout,):
        raise ShapeError(f"bias shape {bias.shape} != ({cout},)")
    _check_finite(x.data, "conv2d input")

    ho, wo = conv_output_size(h, kh, stride, padding), conv_output_size(w, kw, stride, padding)
    xpad = _pad(x.data, padding)
    cols = _im2col(xpad, kh, kw, stride, ho, wo)
    wmat = kernel.data.reshape(cout, -1)
    out = cols @ wmat.T
    if bias is not None:
        out = out + bias.data
    out = out.reshape(n, ho, wo, cout).transpose(0, 3, 1, 2)

    def backward(g):
        gmat = g.transpose(0, 2, 3, 1).reshape(-1, cout)
        gx = gk = gb = None
        if x.requires_grad:
            dcols = gmat @ wmat
            gx = _crop(_col2im(dcols, n, cin, *xpad.shape[2:], kh, kw, stride, ho, wo), padding)
        if kernel.requires_grad:
            gk = (gmat.T @ cols).reshape(kernel.shape)
        if bias is not None and bias.requires_grad:
            gb = gmat.sum(axis=0)
        return gx, gk, gb

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    return Tensor.from_op(np.ascontiguousarray(out), parents, backward, "conv2d")


def conv_transpose2d(x: Tensor, kernel: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """Transposed convolution of ``x`` (N x Cin x H x W) with ``kernel`` (Cin x Cout x kh x kw).

    This is the exact adjoint of ``conv2d`` with the same kernel array, stride
    and padding: each input pixel scatters a scaled copy of the kernel.
    """
    _check_conv_args(stride, padding)
    if x.ndim != 4 or kernel.ndim != 4:
        raise ShapeError(f"conv_transpose2d expects 4-d input and kernel, got {x.shape} and {kernel.shape}")
    n, cin, h, w = x.shape
    kcin, cout, kh, kw = kernel.shape
    if kcin != cin:
        raise ShapeError(f"kernel expects {kcin} input channels, input has {cin}")
    ho, wo = conv_transpose_output_size(h, kh, stride, padding), conv_transpose_output_size(w, kw, stride, padding)
    if ho < 1 or wo < 1:
        raise ShapeError(f"padding {padding} too large for transposed output of {h}x{w}")
    if bias is not None and bias.shape != (cout,):
        raise ShapeError(f"bias shape {bias.shape} != ({cout},)")
    _check_finite(x.data, "conv_transpose2d input")

    hp, wp = (h - 1) * stride + kh, (w - 1) * stride + kw
    xmat = x.data.transpose(0, 2, 3, 1).reshape(-1, cin)
    wmat = kernel.data.reshape(cin, -1)
    full = _col2im(xmat @ wmat, n, cout, hp, wp, kh, kw, stride, h, w)
    out = _crop(full, padding)
    if bias is not None:
        out = out + bias.data[None, :, None, None]

    def backward(g):
        gx = gk = gb = None
        cols = _im2col(_pad(g, padding), kh, kw, stride, h, w)
        if x.requires_grad:
            gx = (cols @ wmat.T).reshape(n, h, w, cin).transpose(0, 3, 1, 2)
        if kernel.requires_grad:
            gk = (xmat.T @ cols).reshape(kernel.shape)
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        return gx, gk, gb

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    return Tensor.from_op(np.ascontiguousarray(out), parents, backward, "conv_transpose2d")


@dataclass
class RunningStats:
    """Per-channel running mean/variance updated by train-mode batch norm."""

    mean: np.ndarray
    var: np.ndarray
    momentum: float = BN_MOMENTUM

    @classmethod
    def init(cls, channels: int, dtype=np.float32) -> "RunningStats":
        return cls(np.zeros(channels, dtype=dtype), np.ones(channels, dtype=dtype))


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    eps: float = 1e-5,
    mode: str = "train",
    running_stats: RunningStats | None = None,
) -> Tensor:
    """Per-channel batch normalization over N, H, W with biased variance."""
    if x.ndim != 4:
        raise ShapeError(f"batch_norm expects N x C x H x W, got {x.shape}")
    n, c, h, w = x.shape
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"gamma/beta must have shape ({c},)")
    if mode not in ("train", "eval"):
        raise ConfigError(f"unknown batch_norm mode {mode!r}")
    g4 = gamma.data[None, :, None, None]

    if mode == "eval":
        if running_stats is None:
            raise ConfigError("eval-mode batch_norm needs running statistics")
        inv = 1.0 / np.sqrt(running_stats.var + eps)
        xhat = (x.data - running_stats.mean[None, :, None, None]) * inv[None, :, None, None]
        out = g4 * xhat + beta.data[None, :, None, None]

        def backward_eval(g):
            return (
                g * g4 * inv[None, :, None, None],
                (g * xhat).sum(axis=(0, 2, 3)),
                g.sum(axis=(0, 2, 3)),
            )

        return Tensor.from_op(out.astype(x.dtype, copy=False), (x, gamma, beta), backward_eval, "batch_norm")

    m = n * h * w
    if m < 2:
        raise DegenerateBatchError(f"batch_norm in train mode needs >= 2 values per channel, got {m}")
    mean = x.data.mean(axis=(0, 2, 3), keepdims=True)
    centered = x.data - mean
    var = (centered * centered).mean(axis=(0, 2, 3), keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    out = g4 * xhat + beta.data[None, :, None, None]
    if running_stats is not None:
        mom = running_stats.momentum
        running_stats.mean = ((1 - mom) * running_stats.mean + mom * mean.ravel()).astype(running_stats.mean.dtype)
        running_stats.var = ((1 - mom) * running_stats.var + mom * var.ravel()).astype(running_stats.var.dtype)

    def backward(g):
        gxhat = g * g4
        gx = inv * (gxhat - gxhat.mean(axis=(0, 2, 3), keepdims=True) - xhat * (gxhat * xhat).mean(axis=(0, 2, 3), keepdims=True))
        return gx, (g * xhat).sum(axis=(0, 2, 3)), g.sum(axis=(0, 2, 3))

    return Tensor.from_op(out.astype(x.dtype, copy=False), (x, gamma, beta), backward, "batch_norm")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return Tensor.from_op(x.data * mask, (x,), lambda g: (g * mask,), "relu")


def leaky_relu(x: Tensor, slope: float = LEAKY_SLOPE) -> Tensor:
    scale = np.where(x.data > 0, 1.0, slope).astype(x.dtype)
    return Tensor.from_op(x.data * scale, (x,), lambda g: (g * scale,), "leaky_relu")


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return Tensor.from_op(y, (x,), lambda g: (g * (1 - y * y),), "tanh")


def sigmoid(x: Tensor) -> Tensor:
    # split by sign so exp never overflows
    d = x.data
    e = np.exp(-np.abs(d))
    y = np.where(d >= 0, 1 / (1 + e), e / (1 + e)).astype(x.dtype, copy=False)
    return Tensor.from_op(y, (x,), lambda g: (g * y * (1 - y),), "sigmoid")


def activation(x: Tensor, kind: str, slope: float = LEAKY_SLOPE) -> Tensor:
    if kind == "relu":
        return relu(x)
    if kind == "leaky_relu":
        return leaky_relu(x, slope)
    if kind == "tanh":
        return tanh(x)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ConfigError(f"unknown activation {kind!r}")


DROPOUT_MODES = ("train", "eval", "off")


def dropout_mask(shape: tuple[int, ...], rate: float, seed, dtype=np.float32) -> np.ndarray:
    """Inverted-dropout mask: zeros with probability ``rate``, survivors scaled by 1/(1-rate)."""
    rng = np.random.default_rng(seed)
    keep = rng.random(shape) >= rate
    return (keep / (1.0 - rate)).astype(dtype)


def dropout(x: Tensor, rate: float, seed, mode: str = "train") -> Tensor:
    """Seeded inverted dropout.

    The generator uses dropout as its noise source, so ``eval`` keeps the mask
    active exactly like ``train``. ``off`` is the identity.
    """
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
    if mode not in DROPOUT_MODES:
        raise ConfigError(f"unknown dropout mode {mode!r}")
    if mode == "off" or rate == 0.0:
        return x
    mask = dropout_mask(x.shape, rate, seed, x.dtype)
    return Tensor.from_op(x.data * mask, (x,), lambda g: (g * mask,), "dropout")


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 4 or b.ndim != 4:
        raise ShapeError("concat_channels expects 4-d tensors")
    if (a.shape[0], *a.shape[2:]) != (b.shape[0], *b.shape[2:]):
        raise ShapeError(f"cannot concatenate {a.shape} and {b.shape} along channels")
    ca = a.shape[1]
    return Tensor.from_op(
        np.concatenate([a.data, b.data], axis=1),
        (a, b),
        lambda g: (g[:, :ca], g[:, ca:]),
        "concat_channels",
    )


@dataclass
class ParamInit:
    """Seeded N(0, std) initializer handing out one generator per call."""

    seed: int
    std: float = 0.02
    dtype: type = np.float32
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self._rng = np.random.default_rng(self.seed)

    def normal(self, shape, mean: float = 0.0) -> Tensor:
        return Tensor(self._rng.normal(mean, self.std, size=shape).astype(self.dtype), requires_grad=True)

    def zeros(self, shape) -> Tensor:
        return Tensor(np.zeros(shape, dtype=self.dtype), requires_grad=True)
