"""Adversarial and reconstruction losses of the conditional GAN."""
from __future__ import annotations

import numpy as np

from ..engine.tensor import Tensor
from ..errors import ConfigError, ShapeError

PROB_EPS = 1e-7


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _safe_log(p: Tensor) -> Tensor:
    return p.clip(PROB_EPS, 1.0 - PROB_EPS).log()


def loss_discriminator(real_map, fake_map) -> Tensor:
    """-mean(log D(real)) - mean(log(1 - D(fake))), i.e. the negated value function."""
    real_map, fake_map = _as_tensor(real_map), _as_tensor(fake_map)
    if real_map.shape != fake_map.shape:
        raise ShapeError(f"patch maps differ in shape: {real_map.shape} vs {fake_map.shape}")
    return -_safe_log(real_map).mean() - _safe_log(1.0 - fake_map).mean()


def loss_generator_adv(fake_map) -> Tensor:
    """Non-saturating generator term -mean(log D(fake))."""
    return -_safe_log(_as_tensor(fake_map)).mean()


def loss_l1(generated, target) -> Tensor:
    generated, target = _as_tensor(generated), _as_tensor(target)
    if generated.shape != target.shape:
        raise ShapeError(f"L1 operands differ in shape: {generated.shape} vs {target.shape}")
    return (generated - target).abs().mean()


def loss_generator_total(adv, l1, lam: float = 100.0) -> Tensor:
    if lam < 0:
        raise ConfigError(f"lambda must be >= 0, got {lam}")
    return _as_tensor(adv) + _as_tensor(l1) * lam
