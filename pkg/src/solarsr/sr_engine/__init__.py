"""Generator inference: tensor ops, forward pass, checkpoint storage."""

from .checkpoint import (
    Checkpoint,
    interpolate_checkpoints,
    load_checkpoint,
    save_checkpoint,
)
from .generator import (
    GeneratorConfig,
    apply_generator,
    generator_forward,
    parameter_shapes,
    random_checkpoint,
    rrdb_forward,
)
from .ops import conv2d, leaky_relu, upsample_nearest2x

__all__ = [
    "Checkpoint",
    "GeneratorConfig",
    "apply_generator",
    "conv2d",
    "generator_forward",
    "interpolate_checkpoints",
    "leaky_relu",
    "load_checkpoint",
    "parameter_shapes",
    "random_checkpoint",
    "rrdb_forward",
    "save_checkpoint",
    "upsample_nearest2x",
]
