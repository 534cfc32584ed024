"""Symmetric OT-regularized training loss over both flow directions.

The objective pairs a forward and a backward squared-MMD term with
mean squared-Euclidean transport costs, weighted by beta. The terms that
do not depend on the model parameters are subtracted from the optimizer's
objective but kept in the reported components, so reported MMD values
always match the estimator definition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor
from .flow import FlowModel
from .kernels import KernelBank, gram, mmd_distance


@dataclass
class LossBreakdown:
    """One loss evaluation: full components plus the trained objective."""

    mmd_fwd: float  # squared MMD of (T(x), z)
    mmd_bwd: float  # squared MMD of (x, T^{-1}(z)); 0 when not symmetric
    ot_fwd: float
    ot_bwd: float
    beta: float
    total: float  # mmd_fwd + mmd_bwd + beta * (ot_fwd + ot_bwd)
    objective: float  # total minus the parameter-constant kernel terms

    CSV_HEADER = "epoch,mmd_fwd,mmd_bwd,ot_fwd,ot_bwd,total"

    def csv_row(self, epoch: int) -> str:
        # float() guards against numpy scalars sneaking into the repr
        return (
            f"{epoch},{float(self.mmd_fwd)!r},{float(self.mmd_bwd)!r},"
            f"{float(self.ot_fwd)!r},{float(self.ot_bwd)!r},{float(self.total)!r}"
        )


def ot_cost(a: Tensor, b: Tensor) -> Tensor:
    """Mean squared Euclidean cost over paired rows (b_i images of a_i)."""
    if a.shape != b.shape:
        raise ShapeError(f"paired cost needs equal shapes, got {a.shape} and {b.shape}")
    diff = ad.sub(a, b)
    return ad.reduce_mean(ad.reduce_sum(ad.mul(diff, diff), axis=1))


def symot_loss(
    model: FlowModel,
    bank: KernelBank,
    x_batch: Tensor,
    z_batch: Tensor,
    beta: float,
    symmetric: bool = True,
) -> tuple[Tensor, LossBreakdown]:
    """Build the training loss graph; returns (differentiable root, breakdown).

    The root is the full total; its gradient equals the trained objective's
    because the dropped within-set kernel terms are constant in the
    parameters. symmetric=False removes the backward MMD and OT terms
    (the one-direction ablation).
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if x_batch.shape != z_batch.shape:
        raise ShapeError(
            f"equal batch shapes required, got {x_batch.shape} and {z_batch.shape}"
        )

    tx = model.forward(x_batch)

    # Forward MMD^2(T(x), z); sum k(z, z') is constant in the parameters.
    k_txtx = ad.reduce_mean(gram(bank, tx, tx))
    k_zz_const = float(np.mean(gram(bank, z_batch.detach(), z_batch.detach()).data))
    k_txz = ad.reduce_mean(gram(bank, tx, z_batch))
    mmd_fwd = ad.add(ad.sub(k_txtx, ad.scale(k_txz, 2.0)), Tensor(k_zz_const))
    ot_fwd = ot_cost(x_batch, tx)

    total = ad.add(mmd_fwd, ad.scale(ot_fwd, beta))
    const = k_zz_const

    if symmetric:
        tz = model.inverse(z_batch)
        k_tztz = ad.reduce_mean(gram(bank, tz, tz))
        k_xx_const = float(np.mean(gram(bank, x_batch.detach(), x_batch.detach()).data))
        k_xtz = ad.reduce_mean(gram(bank, x_batch, tz))
        mmd_bwd = ad.add(ad.sub(k_tztz, ad.scale(k_xtz, 2.0)), Tensor(k_xx_const))
        ot_bwd = ot_cost(tz, z_batch)
        total = ad.add(total, ad.add(mmd_bwd, ad.scale(ot_bwd, beta)))
        const += k_xx_const
        mmd_bwd_v, ot_bwd_v = mmd_bwd.item(), ot_bwd.item()
    else:
        mmd_bwd_v, ot_bwd_v = 0.0, 0.0

    breakdown = LossBreakdown(
        mmd_fwd=mmd_fwd.item(),
        mmd_bwd=mmd_bwd_v,
        ot_fwd=ot_fwd.item(),
        ot_bwd=ot_bwd_v,
        beta=beta,
        total=total.item(),
        objective=total.item() - const,
    )
    if not math.isfinite(breakdown.total):
        raise ad.NumericError("non-finite training loss")
    return total, breakdown


def d_mmd(model: FlowModel, bank: KernelBank, x, z) -> float:
    """Symmetric MMD distance: MMD(T(x), z) + MMD(x, T^{-1}(z))."""
    x_t = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))
    z_t = z if isinstance(z, Tensor) else Tensor(np.asarray(z, dtype=np.float64))
    tx = model.forward(x_t.detach())
    tz = model.inverse(z_t.detach())
    return mmd_distance(bank, tx, z_t) + mmd_distance(bank, x_t, tz)
