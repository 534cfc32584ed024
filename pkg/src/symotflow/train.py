"""AdamW optimizer and the deterministic mini-batch training loop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import NumericError, Tensor, backward
from .flow import FlowModel, init_model
from .kernels import DEFAULT_SCALES, KernelBank
from .loss import LossBreakdown, symot_loss


class TrainingAbort(NumericError):
    """Training hit a non-finite loss or gradient; carries the step index."""

    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step


@dataclass
class TrainConfig:
    beta: float = 3e-2
    symmetric: bool = True
    epochs: int = 500
    batch_size: int = 200
    lr: float = 1e-3
    weight_decay: float = 1e-5
    seed: int = 0
    blocks: int = 8
    subnet_width: int = 128
    gamma: float = 2.0
    kernel_scales: tuple[float, ...] = DEFAULT_SCALES
    grad_clip: float | None = None

    def validate(self, n_x: int, n_z: int) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.lr < 0:
            # lr == 0 is allowed: a no-op run that returns the init model.
            raise ValueError("learning rate must be nonnegative")
        if self.batch_size < 1 or self.batch_size > min(n_x, n_z):
            raise ValueError(
                f"batch_size {self.batch_size} exceeds dataset sizes ({n_x}, {n_z})"
            )
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")


class AdamW:
    """Adam with decoupled weight decay.

    theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta)
    """

    def __init__(
        self,
        params: list[Tensor],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]

    def step(self) -> None:
        grads = []
        for p in self.params:
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if not np.all(np.isfinite(g)):
                raise NumericError("non-finite gradient; step rejected")
            grads.append(g)
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.data = p.data - self.lr * (update + self.weight_decay * p.data)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


def clip_global_norm(params: list[Tensor], max_norm: float) -> None:
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(p.grad * p.grad))
    norm = np.sqrt(total)
    if norm > max_norm and norm > 0:
        factor = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad *= factor


def make_bank(x_data: np.ndarray, z_data: np.ndarray, config: TrainConfig) -> KernelBank:
    """Median-heuristic bank on the untransformed pools, frozen for the run."""
    return KernelBank.from_median(x_data, z_data, scales=config.kernel_scales, seed=config.seed)


def train(
    x_data: np.ndarray,
    z_data: np.ndarray,
    config: TrainConfig,
    model: FlowModel | None = None,
    bank: KernelBank | None = None,
    epoch_callback=None,
) -> tuple[FlowModel, list[LossBreakdown]]:
    """Deterministic training loop; returns the model and per-epoch trace.

    Each epoch shuffles both datasets independently from a seeded stream
    and walks equal-size batch pairs, truncating to the shorter shuffled
    sequence. The trace entry for an epoch is the mean breakdown over its
    batches.
    """
    x_data = np.asarray(x_data, dtype=np.float64)
    z_data = np.asarray(z_data, dtype=np.float64)
    if x_data.size == 0 or z_data.size == 0:
        raise ValueError("training needs nonempty datasets")
    config.validate(x_data.shape[0], z_data.shape[0])

    if model is None:
        model = init_model(
            dim=x_data.shape[1],
            blocks=config.blocks,
            subnet_width=config.subnet_width,
            gamma=config.gamma,
            seed=config.seed,
        )
    if bank is None:
        bank = make_bank(x_data, z_data, config)

    params = model.parameters()
    opt = AdamW(params, lr=config.lr, weight_decay=config.weight_decay)
    shuffle_rng = np.random.Generator(
        np.random.Philox(key=np.random.SeedSequence([config.seed, 0x5F1E]).generate_state(2, np.uint64))
    )

    n_batches = min(x_data.shape[0], z_data.shape[0]) // config.batch_size
    trace: list[LossBreakdown] = []
    step = 0
    for epoch in range(config.epochs):
        xi = shuffle_rng.permutation(x_data.shape[0])
        zi = shuffle_rng.permutation(z_data.shape[0])
        sums = np.zeros(6)
        for b in range(n_batches):
            lo, hi = b * config.batch_size, (b + 1) * config.batch_size
            xb = Tensor(x_data[xi[lo:hi]])
            zb = Tensor(z_data[zi[lo:hi]])
            try:
                root, bd = symot_loss(model, bank, xb, zb, config.beta, config.symmetric)
                opt.zero_grad()
                backward(root)
                if config.grad_clip is not None:
                    clip_global_norm(params, config.grad_clip)
                opt.step()
            except NumericError as exc:
                raise TrainingAbort(step, str(exc)) from exc
            sums += (bd.mmd_fwd, bd.mmd_bwd, bd.ot_fwd, bd.ot_bwd, bd.total, bd.objective)
            step += 1
        mean = sums / n_batches
        entry = LossBreakdown(
            mmd_fwd=mean[0], mmd_bwd=mean[1], ot_fwd=mean[2], ot_bwd=mean[3],
            beta=config.beta, total=mean[4], objective=mean[5],
        )
        trace.append(entry)
        if epoch_callback is not None:
            epoch_callback(epoch, model, entry)
    return model, trace


def write_trace_csv(path, trace: list[LossBreakdown]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(LossBreakdown.CSV_HEADER + "\n")
        for epoch, bd in enumerate(trace):
            f.write(bd.csv_row(epoch) + "\n")
