from terranp.autodiff.checkpoint import load_checkpoint, save_checkpoint
from terranp.autodiff.gradcheck import grad_check
from terranp.autodiff.module import Module
from terranp.autodiff.optim import AdamState, StepLR, adam_step
from terranp.autodiff.tensor import (
    PRIMITIVES,
    Tape,
    Tensor,
    apply_primitive,
    backward,
    concat,
    conv2d,
    matmul,
)

__all__ = (
    "AdamState",
    "Module",
    "PRIMITIVES",
    "StepLR",
    "Tape",
    "Tensor",
    "adam_step",
    "apply_primitive",
    "backward",
    "concat",
    "conv2d",
    "grad_check",
    "load_checkpoint",
    "matmul",
    "save_checkpoint",
)
