from .checkpoint import load_checkpoint, read_checkpoint, save_checkpoint
from .losses import loss_discriminator, loss_generator_adv, loss_generator_total, loss_l1
from .networks import Network, build_discriminator, build_generator, discriminator_forward, generator_forward
from .params import ModelParams, build_model, default_specs
from .specs import PatchGANSpec, ScenarioConfig, TrainConfig, UNetSpec, receptive_field
from .training import (
    Example,
    OptimizerStates,
    StepMetrics,
    TrainResult,
    Translation,
    predict,
    read_history,
    train,
    train_step,
    translate,
    write_history,
)
