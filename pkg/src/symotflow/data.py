"""Seeded 2-D toy dataset generators and CSV persistence.

Every generator is a pure function of its spec: a counter-based
(Philox) stream keyed by the spec's kind and seed, so draws are
bit-identical across runs and independent across specs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KINDS = (
    "moons",
    "circles",
    "gauss_pair_a",
    "gauss_pair_b",
    "eight_gauss_a",
    "eight_gauss_b",
    "linear_gauss_a",
    "linear_gauss_b",
)

# Parameters the source material leaves open; overridable via DatasetSpec.params.
DEFAULT_PARAMS = {
    "circles": {"radius_outer": 1.0, "radius_inner": 0.5},
    "gauss_pair_a": {"mean": (-3.0, -3.0), "cov_scale": 1.0},
    "gauss_pair_b": {"mean": (3.0, 3.0), "cov_scale": 0.5},
    "eight_gauss_a": {"radius": 2.0, "std": 0.2, "angle_offset": 0.0},
    "eight_gauss_b": {"radius": 4.0, "std": 0.3, "angle_offset": np.pi / 8},
    "linear_gauss_a": {"start": (-4.0, -4.0), "end": (4.0, 4.0), "std": 0.3, "components": 5},
    "linear_gauss_b": {"start": (-1.0, 7.0), "end": (7.0, -1.0), "std": 0.3, "components": 5},
}

CSV_HEADER = "x0,x1"


class MalformedFileError(ValueError):
    """Dataset file does not match the two-column CSV contract."""


@dataclass(frozen=True)
class DatasetSpec:
    kind: str
    n: int = 2000
    noise: float = 0.05
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown dataset kind '{self.kind}'")
        if self.n < 1:
            raise ValueError("sample count must be at least 1")
        if self.noise < 0:
            raise ValueError("noise must be nonnegative")


def _rng(spec: DatasetSpec) -> np.random.Generator:
    key = np.random.SeedSequence([KINDS.index(spec.kind), spec.seed]).generate_state(2, np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def generate(spec: DatasetSpec) -> np.ndarray:
    """Deterministic [n x 2] float64 samples for the spec."""
    rng = _rng(spec)
    p = {**DEFAULT_PARAMS.get(spec.kind, {}), **spec.params}
    n = spec.n

    if spec.kind == "moons":
        # Two interleaving unit half-circles, second one shifted to (1, 0.5).
        n_top = n // 2
        t_top = rng.uniform(0.0, np.pi, size=n_top)
        t_bot = rng.uniform(0.0, np.pi, size=n - n_top)
        top = np.stack([np.cos(t_top), np.sin(t_top)], axis=1)
        bot = np.stack([1.0 - np.cos(t_bot), 0.5 - np.sin(t_bot)], axis=1)
        pts = np.concatenate([top, bot], axis=0)
    elif spec.kind == "circles":
        n_out = n // 2
        radii = np.concatenate([
            np.full(n_out, p["radius_outer"]),
            np.full(n - n_out, p["radius_inner"]),
        ])
        t = rng.uniform(0.0, 2.0 * np.pi, size=n)
        pts = radii[:, None] * np.stack([np.cos(t), np.sin(t)], axis=1)
    elif spec.kind in ("gauss_pair_a", "gauss_pair_b"):
        pts = np.asarray(p["mean"]) + np.sqrt(p["cov_scale"]) * rng.standard_normal((n, 2))
    elif spec.kind in ("eight_gauss_a", "eight_gauss_b"):
        angles = p["angle_offset"] + 2.0 * np.pi * np.arange(8) / 8.0
        centers = p["radius"] * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        which = rng.integers(0, 8, size=n)
        pts = centers[which] + p["std"] * rng.standard_normal((n, 2))
    elif spec.kind in ("linear_gauss_a", "linear_gauss_b"):
        k = int(p["components"])
        frac = np.linspace(0.0, 1.0, k)[:, None]
        centers = np.asarray(p["start"]) + frac * (np.asarray(p["end"]) - np.asarray(p["start"]))
        which = rng.integers(0, k, size=n)
        pts = centers[which] + p["std"] * rng.standard_normal((n, 2))
    else:  # pragma: no cover - guarded by DatasetSpec
        raise ValueError(f"unknown dataset kind '{spec.kind}'")

    if spec.noise > 0 and spec.kind in ("moons", "circles"):
        pts = pts + spec.noise * rng.standard_normal(pts.shape)
    return pts


def save(path, points: np.ndarray) -> None:
    """Write points as two-column CSV with 17-significant-digit floats."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise MalformedFileError(f"expected [n x 2] points, got shape {pts.shape}")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(CSV_HEADER + "\n")
        for x0, x1 in pts:
            f.write(f"{x0:.17g},{x1:.17g}\n")


def load(path) -> np.ndarray:
    """Read a dataset CSV back into [n x 2] float64; validates the header."""
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise MalformedFileError(f"missing '{CSV_HEADER}' header in {path}")
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 2:
            raise MalformedFileError(f"{path}:{i}: expected 2 columns, got {len(parts)}")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise MalformedFileError(f"{path}:{i}: non-numeric value") from exc
    return np.asarray(rows, dtype=np.float64).reshape(-1, 2)
