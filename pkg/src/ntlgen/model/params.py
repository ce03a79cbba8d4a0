"""Parameter stores for the generator/discriminator pair."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .networks import Network, build_discriminator, build_generator
from .specs import PatchGANSpec, ScenarioConfig, UNetSpec


@dataclass
class ModelParams:
    scenario: ScenarioConfig
    generator: Network
    discriminator: Network

    @property
    def unet(self) -> UNetSpec:
        return self.generator.spec

    @property
    def patchgan(self) -> PatchGANSpec:
        return self.discriminator.spec


def default_specs(scenario: ScenarioConfig, tile_size: int) -> tuple[UNetSpec, PatchGANSpec]:
    """Full pix2pix layout for tiles of 256 and up, the reduced layout below."""
    c = scenario.n_channels
    if tile_size >= 256 and tile_size % 256 == 0:
        return UNetSpec(input_channels=c), PatchGANSpec(input_channels=c + 1)
    return UNetSpec.desk(c), PatchGANSpec.desk(c + 1)


def build_model(
    scenario: ScenarioConfig,
    unet: UNetSpec,
    patchgan: PatchGANSpec,
    seed: int = 0,
    dtype=np.float32,
) -> ModelParams:
    if unet.input_channels != scenario.n_channels:
        raise ConfigError(f"generator takes {unet.input_channels} channels, scenario {scenario.name} has {scenario.n_channels}")
    if patchgan.input_channels != scenario.n_channels + unet.output_channels:
        raise ConfigError("discriminator input must be condition channels plus the target channel")
    g_seed, d_seed = np.random.SeedSequence(seed).generate_state(2)
    return ModelParams(
        scenario,
        build_generator(unet, int(g_seed), dtype),
        build_discriminator(patchgan, int(d_seed), dtype),
    )
