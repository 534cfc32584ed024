"""Invertible coupling-flow transformation with an exact analytic inverse.

A model is an ordered stack of blocks. Each block keeps the first half of
the channels fixed, rescales and shifts the second half using two small
fully connected nets of the fixed half, then applies a fixed channel
permutation. The log-scale is clamped through gamma * tanh, so every block
(and hence the stack) is invertible in closed form for any parameters.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor

CHECKPOINT_MAGIC = b"SYMOT1"


class CheckpointError(ValueError):
    """Checkpoint file is truncated, corrupt, or shape-inconsistent."""


@dataclass
class Subnet:
    """Fully connected net: linear layers with ReLU between, linear output.

    Weights are stored as (in x out) so the forward pass is a plain
    x @ W + b without transposes on the tape.
    """

    weights: list[Tensor]
    biases: list[Tensor]

    def __call__(self, x: Tensor) -> Tensor:
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = ad.add_bias(ad.matmul(h, w), b)
            if i != last:
                h = ad.relu(h)
        return h

    def parameters(self) -> list[Tensor]:
        return [t for pair in zip(self.weights, self.biases) for t in pair]

    def layer_shapes(self) -> list[tuple[int, int]]:
        return [tuple(w.shape) for w in self.weights]


@dataclass
class CouplingBlock:
    s_net: Subnet
    t_net: Subnet
    gamma: float
    permutation: np.ndarray  # output channel i reads concatenated channel perm[i]
    split: int  # width of the fixed first half

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        perm = np.asarray(self.permutation, dtype=np.intp)
        if sorted(perm.tolist()) != list(range(perm.size)):
            raise ValueError("permutation must be a bijection on the channels")
        self.permutation = perm
        self.inverse_permutation = np.argsort(perm)

    def parameters(self) -> list[Tensor]:
        return self.s_net.parameters() + self.t_net.parameters()


def couple_forward(block: CouplingBlock, x: Tensor) -> Tensor:
    d = x.shape[1] if len(x.shape) == 2 else 0
    if d < 2:
        raise ShapeError("coupling needs two nonempty halves (d >= 2)")
    if d != block.permutation.size:
        raise ShapeError(f"block is {block.permutation.size}-channel, input is {d}")
    x1 = ad.select_cols(x, np.arange(block.split))
    x2 = ad.select_cols(x, np.arange(block.split, d))
    log_scale = ad.scale(ad.tanh(block.s_net(x1)), block.gamma)
    z2 = ad.add(ad.mul(x2, ad.exp(log_scale)), block.t_net(x1))
    z = ad.concat_cols(x1, z2)
    return ad.select_cols(z, block.permutation)


def couple_inverse(block: CouplingBlock, z: Tensor) -> Tensor:
    d = z.shape[1] if len(z.shape) == 2 else 0
    if d < 2:
        raise ShapeError("coupling needs two nonempty halves (d >= 2)")
    if d != block.permutation.size:
        raise ShapeError(f"block is {block.permutation.size}-channel, input is {d}")
    u = ad.select_cols(z, block.inverse_permutation)
    z1 = ad.select_cols(u, np.arange(block.split))
    z2 = ad.select_cols(u, np.arange(block.split, d))
    log_scale = ad.scale(ad.tanh(block.s_net(z1)), block.gamma)
    x2 = ad.mul(ad.sub(z2, block.t_net(z1)), ad.exp(ad.neg(log_scale)))
    return ad.concat_cols(z1, x2)


@dataclass
class FlowModel:
    blocks: list[CouplingBlock]
    dim: int

    def forward(self, x: Tensor) -> Tensor:
        if len(x.shape) != 2 or x.shape[1] != self.dim:
            raise ShapeError(f"expected [n x {self.dim}] input, got {x.shape}")
        for block in self.blocks:
            x = couple_forward(block, x)
        return x

    def inverse(self, z: Tensor) -> Tensor:
        if len(z.shape) != 2 or z.shape[1] != self.dim:
            raise ShapeError(f"expected [n x {self.dim}] input, got {z.shape}")
        for block in reversed(self.blocks):
            z = couple_inverse(block, z)
        return z

    def parameters(self) -> list[Tensor]:
        return [p for block in self.blocks for p in block.parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()


def init_model(
    dim: int,
    blocks: int = 8,
    subnet_width: int = 128,
    gamma: float = 2.0,
    seed: int = 0,
) -> FlowModel:
    """Seeded model construction with a near-identity start.

    Hidden layers get scaled normal weights; each subnet's output layer is
    zeroed, so a fresh model is a pure composition of its permutations.
    Per-block permutations are drawn uniformly and an identity draw is
    redrawn once, so even d=2 models mix channels.
    """
    if dim < 2:
        raise ShapeError("model dimensionality must be at least 2")
    if blocks < 1:
        raise ValueError("need at least one block")
    rng = np.random.Generator(np.random.Philox(key=np.random.SeedSequence([seed, 0x1817]).generate_state(2, np.uint64)))
    split = (dim + 1) // 2
    d1, d2 = split, dim - split
    block_list = []
    for _ in range(blocks):
        nets = []
        for _net in range(2):
            dims = [d1, subnet_width, subnet_width, d2]
            weights, biases = [], []
            for i in range(len(dims) - 1):
                fan_in, fan_out = dims[i], dims[i + 1]
                if i == len(dims) - 2:
                    w = np.zeros((fan_in, fan_out))
                else:
                    w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
                weights.append(Tensor(w, requires_grad=True))
                biases.append(Tensor(np.zeros(fan_out), requires_grad=True))
            nets.append(Subnet(weights, biases))
        perm = rng.permutation(dim)
        if np.array_equal(perm, np.arange(dim)):
            perm = rng.permutation(dim)
        block_list.append(CouplingBlock(nets[0], nets[1], gamma, perm, split))
    return FlowModel(block_list, dim)


def composed_permutation(model: FlowModel) -> np.ndarray:
    """The single permutation a zero-subnet model applies: out[i] = in[p[i]]."""
    p = np.arange(model.dim)
    for block in model.blocks:
        p = p[block.permutation]
    return p


# ---------------------------------------------------------------------------
# checkpoint container: magic, header (dim, blocks, gamma, subnet shapes,
# permutations), then every parameter as little-endian float64 in
# declaration order.

def save_checkpoint(model: FlowModel, path) -> None:
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        first = model.blocks[0]
        f.write(struct.pack("<IId", model.dim, len(model.blocks), first.gamma))
        shapes = first.s_net.layer_shapes()
        f.write(struct.pack("<I", len(shapes)))
        for din, dout in shapes:
            f.write(struct.pack("<II", din, dout))
        for block in model.blocks:
            f.write(np.asarray(block.permutation, dtype="<u4").tobytes())
        for p in model.parameters():
            f.write(np.asarray(p.data, dtype="<f8").tobytes())


def load_checkpoint(path) -> FlowModel:
    with open(path, "rb") as f:
        raw = f.read()
    off = len(CHECKPOINT_MAGIC)
    if raw[:off] != CHECKPOINT_MAGIC:
        raise CheckpointError("bad magic: not a flow checkpoint")
    try:
        dim, n_blocks, gamma = struct.unpack_from("<IId", raw, off)
        off += struct.calcsize("<IId")
        (n_layers,) = struct.unpack_from("<I", raw, off)
        off += 4
        shapes = []
        for _ in range(n_layers):
            din, dout = struct.unpack_from("<II", raw, off)
            off += 8
            shapes.append((din, dout))
        perms = []
        for _ in range(n_blocks):
            perm = np.frombuffer(raw, dtype="<u4", count=dim, offset=off).astype(np.intp)
            off += 4 * dim
            perms.append(perm)
    except struct.error as exc:
        raise CheckpointError("truncated checkpoint header") from exc

    split = (dim + 1) // 2
    if not shapes or shapes[0][0] != split or shapes[-1][1] != dim - split:
        raise CheckpointError("subnet shapes inconsistent with model dimension")
    for (_, a), (b, _) in zip(shapes, shapes[1:]):
        if a != b:
            raise CheckpointError("subnet layer shapes do not chain")

    blocks = []
    for perm in perms:
        nets = []
        for _net in range(2):
            weights, biases = [], []
            for din, dout in shapes:
                need = 8 * (din * dout + dout)
                if off + need > len(raw):
                    raise CheckpointError("truncated checkpoint payload")
                w = np.frombuffer(raw, dtype="<f8", count=din * dout, offset=off).reshape(din, dout)
                off += 8 * din * dout
                b = np.frombuffer(raw, dtype="<f8", count=dout, offset=off)
                off += 8 * dout
                weights.append(Tensor(w.copy(), requires_grad=True))
                biases.append(Tensor(b.copy(), requires_grad=True))
            nets.append(Subnet(weights, biases))
        try:
            blocks.append(CouplingBlock(nets[0], nets[1], gamma, perm, split))
        except ValueError as exc:
            raise CheckpointError(str(exc)) from exc
    if off != len(raw):
        raise CheckpointError("trailing bytes after checkpoint payload")
    return FlowModel(blocks, dim)
