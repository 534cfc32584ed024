"""Invertible coupling-flow transport between sampled distributions.

Trains a stack of affine coupling blocks so that the forward map carries
one sample set onto another and the exact inverse carries it back, using a
symmetric multi-kernel MMD loss with a mean squared-Euclidean transport
cost as regularization.
"""

__version__ = "0.1.0"

from .autodiff import NumericError, ShapeError, Tensor, backward
from .data import DatasetSpec, generate
from .evaluate import MetricsReport, evaluate, export_correspondence, sweep_beta
from .flow import (
    CouplingBlock,
    FlowModel,
    Subnet,
    couple_forward,
    couple_inverse,
    init_model,
    load_checkpoint,
    save_checkpoint,
)
from .kernels import KernelBank, gram, median_heuristic, mmd2_biased, mmd2_paper_form, mmd_distance
from .loss import LossBreakdown, d_mmd, ot_cost, symot_loss
from .train import AdamW, TrainConfig, make_bank, train

__all__ = [
    "AdamW",
    "CouplingBlock",
    "DatasetSpec",
    "FlowModel",
    "KernelBank",
    "LossBreakdown",
    "MetricsReport",
    "NumericError",
    "ShapeError",
    "Subnet",
    "Tensor",
    "TrainConfig",
    "backward",
    "couple_forward",
    "couple_inverse",
    "d_mmd",
    "evaluate",
    "export_correspondence",
    "generate",
    "gram",
    "init_model",
    "load_checkpoint",
    "make_bank",
    "median_heuristic",
    "mmd2_biased",
    "mmd2_paper_form",
    "mmd_distance",
    "ot_cost",
    "save_checkpoint",
    "sweep_beta",
    "symot_loss",
    "train",
]
