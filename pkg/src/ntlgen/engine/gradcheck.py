"""Finite-difference verification of analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, grad


@dataclass
class GradCheckReport:
    max_rel_error: float
    passed: bool
    n_checked: int
    n_kink_excluded: int

    @property
    def kink_excluded(self) -> bool:
        return self.n_kink_excluded > 0


DEFAULT_STEP = 1e-5


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """Elementwise |a - n| / max(|a|, |n|, floor).

    The floor is 1e-3 of the largest gradient magnitude, so entries that are
    tiny only by cancellation are judged on an absolute scale.
    """
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0))
    floor = max(1e-3 * scale, 1e-12)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def grad_check(
    op: Callable[..., Tensor],
    inputs: Sequence[np.ndarray],
    tolerance: float,
    h: float | None = None,
    kinks: Sequence[float] = (),
    seed: int = 0,
) -> GradCheckReport:
    """Compare analytic gradients of ``op`` against central differences.

    Analytic gradients are computed at the dtype of ``inputs``; the numeric
    reference is evaluated on 64-bit copies.

    ``op`` receives one Tensor per entry in ``inputs`` and may return any
    shape; it is reduced to a scalar by a fixed random projection so every
    output element contributes. Input entries within ``h`` of a value listed
    in ``kinks`` are excluded and counted instead of compared.
    """
    originals = [np.asarray(x) for x in inputs]
    dtype = originals[0].dtype
    # the difference quotient is always taken in 64-bit: a 32-bit quotient is
    # noisier than the 32-bit analytic gradient it is meant to check
    inputs = [x.astype(np.float64) for x in originals]
    h = DEFAULT_STEP if h is None else h

    probe = op(*[Tensor(x) for x in originals])
    weights = np.random.default_rng(seed).standard_normal(probe.shape)

    def scalar(arrays) -> float:
        return float((op(*[Tensor(a) for a in arrays]).data.astype(np.float64) * weights).sum())

    leaves = [Tensor(x, requires_grad=True) for x in originals]
    loss = (op(*leaves) * Tensor(weights.astype(dtype))).sum()
    analytic = grad(loss, leaves)

    worst, checked, excluded = 0.0, 0, 0
    for k, x in enumerate(inputs):
        numeric = np.zeros_like(x, dtype=np.float64)
        keep = np.ones(x.shape, dtype=bool)
        for kink in kinks:
            keep &= np.abs(x - kink) > h
        for idx in np.ndindex(x.shape):
            if not keep[idx]:
                continue
            orig = x[idx]
            x[idx] = orig + h
            up = scalar(inputs)
            x[idx] = orig - h
            down = scalar(inputs)
            x[idx] = orig
            numeric[idx] = (up - down) / (2 * h)
        a = analytic[k].astype(np.float64)
        if keep.any():
            worst = max(worst, float(relative_error(a[keep], numeric[keep]).max()))
        checked += int(keep.sum())
        excluded += int((~keep).sum())
    return GradCheckReport(worst, worst < tolerance, checked, excluded)
