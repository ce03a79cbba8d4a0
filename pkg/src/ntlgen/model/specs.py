"""Configuration dataclasses for the generator, discriminator and training."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

from ..errors import ConfigError

PIX2PIX_ENCODER = (64, 128, 256, 512, 512, 512, 512, 512)
PATCHGAN_WIDTHS = (64, 128, 256, 512, 1)
PATCHGAN_STRIDES = (2, 2, 2, 1, 1)

SCENARIO_CHANNELS = {
    "rgb": ("red", "green", "blue"),
    "rgbi": ("red", "green", "blue", "nir"),
    "rgbism": ("red", "green", "blue", "nir", "sm"),
}


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    channels: tuple[str, ...]

    @classmethod
    def from_name(cls, name: str) -> "ScenarioConfig":
        key = name.lower()
        if key not in SCENARIO_CHANNELS:
            raise ConfigError(f"unknown scenario {name!r}; expected one of {sorted(SCENARIO_CHANNELS)}")
        return cls(key, SCENARIO_CHANNELS[key])

    @property
    def n_channels(self) -> int:
        return len(self.channels)


@dataclass(frozen=True)
class UNetSpec:
    """Encoder/decoder layout of the generator.

    The generator has ``n = 2 * len(encoder_widths)`` layers. Encoder layer j
    halves the spatial size; decoder layer k doubles it and, except for the
    output layer, its activation is concatenated with encoder layer
    ``L - k`` where ``L = len(encoder_widths)``.
    """

    input_channels: int = 3
    output_channels: int = 1
    encoder_widths: tuple[int, ...] = PIX2PIX_ENCODER
    decoder_widths: tuple[int, ...] | None = None
    dropout_layers: tuple[int, ...] = (1, 2, 3)
    dropout_rate: float = 0.5
    kernel: int = 4
    stride: int = 2

    def __post_init__(self):
        if self.decoder_widths is None:
            object.__setattr__(self, "decoder_widths", tuple(reversed(self.encoder_widths[:-1])))
        if self.input_channels < 1 or self.output_channels < 1:
            raise ConfigError("channel counts must be positive")
        if len(self.encoder_widths) < 2:
            raise ConfigError("a U-Net needs at least two encoder layers")
        if len(self.decoder_widths) != len(self.encoder_widths) - 1:
            raise ConfigError(
                f"need {len(self.encoder_widths) - 1} decoder widths, got {len(self.decoder_widths)}"
            )
        if self.stride != 2 or self.kernel != 4:
            # k=4, s=2, p=1 is the only combination whose sizes halve/double exactly
            raise ConfigError("the U-Net layout requires kernel 4 and stride 2")
        if any(not 1 <= i <= len(self.decoder_widths) for i in self.dropout_layers):
            raise ConfigError(f"dropout layer indices must lie in 1..{len(self.decoder_widths)}")
        if not 0 <= self.dropout_rate < 1:
            raise ConfigError("dropout_rate must lie in [0, 1)")

    @classmethod
    def desk(cls, input_channels: int, widths: tuple[int, ...] = (32, 64, 128, 128), dropout_layers=(1,)) -> "UNetSpec":
        """Reduced-depth generator for 64 x 64 tiles."""
        return cls(input_channels=input_channels, encoder_widths=tuple(widths), dropout_layers=tuple(dropout_layers))

    @property
    def depth(self) -> int:
        return len(self.encoder_widths)

    @property
    def n_layers(self) -> int:
        return 2 * self.depth

    @property
    def size_multiple(self) -> int:
        return self.stride**self.depth

    def check_size(self, h: int, w: int) -> None:
        m = self.size_multiple
        if h % m or w % m:
            raise ConfigError(f"input {h}x{w} is not divisible by {m} for a {self.depth}-level U-Net")

    def decoder_input_channels(self) -> list[int]:
        """Input channels of each decoder layer, skip concatenations included."""
        L = self.depth
        chans = [self.encoder_widths[-1]]
        for k in range(1, L):
            chans.append(self.decoder_widths[k - 1] + self.encoder_widths[L - k - 1])
        return chans

    def skip_junctions(self) -> list[tuple[int, int, int]]:
        """(decoder layer index i, paired encoder layer n - i, channels after concat)."""
        L, n = self.depth, self.n_layers
        out = []
        for k in range(1, L):
            i = L + k
            out.append((i, n - i, self.decoder_widths[k - 1] + self.encoder_widths[n - i - 1]))
        return out

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "UNetSpec":
        d = dict(d)
        for key in ("encoder_widths", "decoder_widths", "dropout_layers"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass(frozen=True)
class PatchGANSpec:
    input_channels: int = 4
    widths: tuple[int, ...] = PATCHGAN_WIDTHS
    strides: tuple[int, ...] = PATCHGAN_STRIDES
    batch_norm: tuple[bool, ...] | None = None
    kernel: int = 4
    padding: int = 1

    def __post_init__(self):
        if self.batch_norm is None:
            n = len(self.widths)
            object.__setattr__(self, "batch_norm", tuple(0 < i < n - 1 for i in range(n)))
        if not (len(self.widths) == len(self.strides) == len(self.batch_norm)):
            raise ConfigError("widths, strides and batch_norm flags must have equal length")
        if self.batch_norm[0]:
            raise ConfigError("the first discriminator layer carries no batch normalization")
        if self.widths[-1] != 1:
            raise ConfigError("the discriminator head must have one output channel")

    @classmethod
    def desk(cls, input_channels: int) -> "PatchGANSpec":
        """Four-layer discriminator (34 x 34 receptive field) for 64 x 64 tiles."""
        return cls(input_channels=input_channels, widths=(32, 64, 128, 1), strides=(2, 2, 1, 1))

    def output_size(self, size: int) -> int:
        for s in self.strides:
            size = (size + 2 * self.padding - self.kernel) // s + 1
        return size

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PatchGANSpec":
        d = dict(d)
        for key in ("widths", "strides", "batch_norm"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)


def receptive_field(spec: PatchGANSpec) -> int:
    """Side length in pixels of the input patch seen by one output unit."""
    rf, jump = 1, 1
    for s in spec.strides:
        rf += (spec.kernel - 1) * jump
        jump *= s
    return rf


@dataclass
class TrainConfig:
    lam: float = 100.0
    steps: int | None = None
    epochs: int | None = None
    batch_size: int = 1
    lr_g: float = 2e-4
    lr_d: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    checkpoint_every: int = 0
    log_every: int = 100
    dtype: str = "float32"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.lr_g < 0 or self.lr_d < 0:
            raise ConfigError("learning rates must be >= 0")
        if self.steps is not None and self.steps < 0:
            raise ConfigError("steps must be >= 0")
        if self.epochs is not None and self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"unsupported dtype {self.dtype!r}")
