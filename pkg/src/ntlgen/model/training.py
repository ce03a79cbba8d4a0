"""Alternating discriminator/generator optimization and inference."""
from __future__ import annotations

import csv
import logging
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from ..engine.optim import AdamState, adam_step
from ..engine.tensor import Tensor, backward
from ..errors import ConfigError, TrainingDivergedError
from ..metrics import NIGHT_RANGE, destandardize
from .losses import loss_discriminator, loss_generator_adv, loss_generator_total, loss_l1
from .checkpoint import save_checkpoint
from .networks import Network, discriminator_forward, generator_forward
from .params import ModelParams, build_model, default_specs
from .specs import PatchGANSpec, ScenarioConfig, TrainConfig, UNetSpec

log = logging.getLogger(__name__)

HISTORY_FIELDS = ("step", "loss_d", "loss_g_adv", "loss_l1", "loss_g_total")


@dataclass
class OptimizerStates:
    g: AdamState
    d: AdamState

    @classmethod
    def from_config(cls, config: TrainConfig) -> "OptimizerStates":
        kw = dict(beta1=config.beta1, beta2=config.beta2, eps=config.eps)
        return cls(AdamState(lr=config.lr_g, **kw), AdamState(lr=config.lr_d, **kw))


@dataclass
class StepMetrics:
    step: int
    loss_d: float
    loss_g_adv: float
    loss_l1: float
    loss_g_total: float

    def row(self) -> list[str]:
        return [str(self.step)] + [repr(float(v)) for v in (self.loss_d, self.loss_g_adv, self.loss_l1, self.loss_g_total)]


@contextmanager
def frozen(net: Network) -> Iterator[None]:
    """Stop gradient recording for ``net``'s parameters inside the block."""
    flags = {k: p.requires_grad for k, p in net.params.items()}
    for p in net.params.values():
        p.requires_grad = False
    try:
        yield
    finally:
        for k, p in net.params.items():
            p.requires_grad = flags[k]


def step_seed(seed: int, step: int) -> tuple[int, int]:
    return (int(seed), int(step))


def train_step(
    model: ModelParams,
    condition: np.ndarray,
    target: np.ndarray,
    opt: OptimizerStates,
    config: TrainConfig,
    step: int,
) -> StepMetrics:
    """One discriminator Adam step followed by one generator Adam step."""
    G, D = model.generator, model.discriminator
    dtype = G.dtype
    cond = Tensor(np.asarray(condition, dtype=dtype))
    real = Tensor(np.asarray(target, dtype=dtype))

    fake = generator_forward(G, cond, "train", seed=step_seed(config.seed, step))

    real_map = discriminator_forward(D, cond, real, "train")
    fake_map = discriminator_forward(D, cond, fake.detach(), "train")
    ld = loss_discriminator(real_map, fake_map)
    if not math.isfinite(ld.item()):
        raise TrainingDivergedError(step, f"discriminator loss is {ld.item()} at step {step}")
    D.zero_grad()
    backward(ld)
    adam_step(D.params, D.grads(), opt.d)

    with frozen(D):
        adv = loss_generator_adv(discriminator_forward(D, cond, fake, "eval"))
        l1 = loss_l1(fake, real)
        total = loss_generator_total(adv, l1, config.lam)
        if not math.isfinite(total.item()):
            raise TrainingDivergedError(step, f"generator loss is {total.item()} at step {step}")
        G.zero_grad()
        backward(total)
    adam_step(G.params, G.grads(), opt.g)
    return StepMetrics(step, ld.item(), adv.item(), l1.item(), total.item())


@dataclass
class Example:
    """One training pair: C x H x W condition and 1 x H x W target, both in [-1, 1]."""

    cell_id: str
    condition: np.ndarray
    target: np.ndarray


@dataclass
class TrainResult:
    model: ModelParams
    history: list[StepMetrics] = field(default_factory=list)
    checkpoints: list[Path] = field(default_factory=list)


def _batches(n: int, batch_size: int, total_steps: int, rng: np.random.Generator) -> Iterator[np.ndarray]:
    produced = 0
    while produced < total_steps:
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            if produced == total_steps:
                return
            yield order[start : start + batch_size]
            produced += 1


def resolve_steps(config: TrainConfig, n_examples: int) -> int:
    if config.steps is not None:
        return config.steps
    if config.epochs is not None:
        return config.epochs * math.ceil(n_examples / config.batch_size)
    raise ConfigError("TrainConfig needs steps or epochs")


def train(
    dataset: Sequence[Example],
    scenario: ScenarioConfig,
    config: TrainConfig,
    unet: UNetSpec | None = None,
    patchgan: PatchGANSpec | None = None,
    out_dir: str | Path | None = None,
    model: ModelParams | None = None,
) -> TrainResult:
    """Run seeded, shuffled train steps; optionally write checkpoints and history."""
    if not dataset:
        raise ConfigError("training dataset is empty")
    c = dataset[0].condition.shape[0]
    if c != scenario.n_channels:
        raise ConfigError(f"examples carry {c} channels, scenario {scenario.name} needs {scenario.n_channels}")
    if model is None:
        if unet is None or patchgan is None:
            d_unet, d_patch = default_specs(scenario, dataset[0].condition.shape[-1])
            unet, patchgan = unet or d_unet, patchgan or d_patch
        model = build_model(scenario, unet, patchgan, config.seed, np.dtype(config.dtype))
    opt = OptimizerStates.from_config(config)
    total = resolve_steps(config, len(dataset))
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
    conds = np.stack([e.condition for e in dataset])
    targets = np.stack([e.target for e in dataset])

    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    result = TrainResult(model)

    for step, idx in enumerate(_batches(len(dataset), config.batch_size, total, rng), start=1):
        m = train_step(model, conds[idx], targets[idx], opt, config, step)
        result.history.append(m)
        if config.log_every and step % config.log_every == 0:
            log.info("step %d loss_d=%.4f loss_g_adv=%.4f l1=%.4f", step, m.loss_d, m.loss_g_adv, m.loss_l1)
        if out is not None and config.checkpoint_every and step % config.checkpoint_every == 0 and step < total:
            path = out / f"checkpoint_{step:06d}.ntl"
            save_checkpoint(model, path)
            result.checkpoints.append(path)
    if out is not None:
        path = out / "checkpoint.ntl"
        save_checkpoint(model, path)
        result.checkpoints.append(path)
        write_history(result.history, out / "history.csv")
    return result


def write_history(history: Sequence[StepMetrics], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_FIELDS)
        for m in history:
            w.writerow(m.row())


def read_history(path: str | Path) -> list[StepMetrics]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        StepMetrics(int(r["step"]), float(r["loss_d"]), float(r["loss_g_adv"]), float(r["loss_l1"]), float(r["loss_g_total"]))
        for r in rows
    ]


@dataclass
class Translation:
    standardized: np.ndarray  # H x W in (-1, 1)
    radiance: np.ndarray  # H x W in [0, 300]


def translate(model: ModelParams, condition: np.ndarray, seed: int = 0) -> Translation:
    """Generate a nighttime raster for one C x H x W condition tile."""
    condition = np.asarray(condition)
    if condition.ndim != 3:
        raise ConfigError(f"condition tile must be C x H x W, got {condition.shape}")
    if condition.shape[0] != model.scenario.n_channels:
        raise ConfigError(
            f"checkpoint scenario {model.scenario.name} needs {model.scenario.n_channels} channels, tile has {condition.shape[0]}"
        )
    x = Tensor(condition[None].astype(model.generator.dtype))
    y = generator_forward(model.generator, x, "eval", seed=seed).data[0, 0]
    radiance = np.clip(destandardize(y.astype(np.float64), *NIGHT_RANGE), *NIGHT_RANGE)
    return Translation(y, radiance.astype(np.float32))


def predict(model: ModelParams, examples: Sequence[Example], seed: int = 0) -> list[np.ndarray]:
    """Standardized predictions (H x W) for each example."""
    return [translate(model, e.condition, seed).standardized for e in examples]
