"""Gaussian multi-kernel bank and the biased two-sample MMD estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor

DEFAULT_SCALES = (0.25, 0.5, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class KernelBank:
    """Positive bandwidths (sigma^2 per kernel) with convex weights."""

    bandwidths: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.bandwidths) != len(self.weights) or not self.bandwidths:
            raise ValueError("need matching, nonempty bandwidths and weights")
        if any(b <= 0 for b in self.bandwidths):
            raise ValueError("bandwidths must be positive")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be nonnegative")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")

    @classmethod
    def from_median(cls, a, b, scales=DEFAULT_SCALES, seed: int = 0) -> "KernelBank":
        """Equal-weight bank at scaled multiples of the median heuristic."""
        m = median_heuristic(a, b, seed=seed)
        n = len(scales)
        return cls(tuple(m * s for s in scales), tuple(1.0 / n for _ in scales))


def _as_points(t) -> np.ndarray:
    arr = t.data if isinstance(t, Tensor) else np.asarray(t, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"expected a [n x d] sample array, got shape {arr.shape}")
    return arr


def median_heuristic(a, b, max_points: int = 2000, seed: int = 0) -> float:
    """Median pairwise squared distance over the pooled points.

    Pools are subsampled (seeded) above max_points. Only distinct pairs
    enter the median; a nonpositive result falls back to 1.0.
    """
    pa, pb = _as_points(a), _as_points(b)
    if pa.shape[0] + pb.shape[0] < 2:
        raise ValueError("median heuristic needs at least two pooled points")
    pooled = np.concatenate([pa, pb], axis=0)
    if pooled.shape[0] > max_points:
        rng = np.random.Generator(np.random.Philox(key=np.random.SeedSequence([seed, 0x3ED1]).generate_state(2, np.uint64)))
        pooled = pooled[rng.choice(pooled.shape[0], size=max_points, replace=False)]
    sq = np.sum(pooled * pooled, axis=1)
    dist = np.maximum(sq[:, None] + sq[None, :] - 2.0 * pooled @ pooled.T, 0.0)
    iu = np.triu_indices(pooled.shape[0], k=1)
    med = float(np.median(dist[iu]))
    return med if med > 0.0 else 1.0


def gram(bank: KernelBank, a: Tensor, b: Tensor) -> Tensor:
    """Weighted sum of Gaussian grams: sum_l w_l exp(-||a_i - b_j||^2 / (2 s_l))."""
    sq = ad.pairwise_sqdist(a, b)
    total = None
    for s2, w in zip(bank.bandwidths, bank.weights):
        term = ad.scale(ad.exp(ad.scale(sq, -0.5 / s2)), w)
        total = term if total is None else ad.add(total, term)
    return total


def _wrap(t) -> Tensor:
    return t if isinstance(t, Tensor) else Tensor(np.asarray(t, dtype=np.float64))


def mmd2_biased(bank: KernelBank, x, z) -> Tensor:
    """Biased squared-MMD estimator with full double sums.

    (1/N^2) sum k(x,x') + (1/N'^2) sum k(z,z') - (2/NN') sum k(x,z).
    """
    x, z = _wrap(x), _wrap(z)
    if _as_points(x).shape[0] == 0 or _as_points(z).shape[0] == 0:
        raise ShapeError("mmd needs nonempty sample sets")
    kxx = ad.reduce_mean(gram(bank, x, x))
    kzz = ad.reduce_mean(gram(bank, z, z))
    kxz = ad.reduce_mean(gram(bank, x, z))
    return ad.sub(ad.add(kxx, kzz), ad.scale(kxz, 2.0))


def mmd2_paper_form(bank: KernelBank, x, z) -> Tensor:
    """Equal-batch transcription with a single 1/(NN') normalization.

    Only type-checks for N == N', where it coincides with mmd2_biased.
    """
    x, z = _wrap(x), _wrap(z)
    n, m = _as_points(x).shape[0], _as_points(z).shape[0]
    if n == 0 or m == 0:
        raise ShapeError("mmd needs nonempty sample sets")
    if n != m:
        raise ShapeError(f"equal batch sizes required, got {n} and {m}")
    inner = ad.sub(
        ad.add(gram(bank, x, x), gram(bank, z, z)),
        ad.scale(gram(bank, x, z), 2.0),
    )
    return ad.scale(ad.reduce_sum(inner), 1.0 / (n * m))


def mmd_distance(bank: KernelBank, x, z) -> float:
    """Reported MMD distance: sqrt of the clamped biased estimator."""
    return math.sqrt(max(mmd2_biased(bank, _wrap(x).detach(), _wrap(z).detach()).item(), 0.0))
