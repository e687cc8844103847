"""Seeded synthetic corruptions: block, cross and salt & pepper.

Every mask covers exactly ``round(fraction * h * w)`` pixels (half-up
rounding). Images are vectorized row-major.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .matrix_io import LabeledDataset

KINDS = ("block", "cross", "salt_pepper")
FILLS = ("zeros", "max", "random_binary")

_KIND_ALIASES = {"saltpepper": "salt_pepper", "salt-pepper": "salt_pepper", "pepper_salt": "salt_pepper"}


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str = "block"
    fraction: float = 0.10
    seed: int = 0
    fill: str | None = None  # None: random_binary for salt_pepper, zeros otherwise

    def __post_init__(self):
        kind = _KIND_ALIASES.get(self.kind, self.kind)
        if kind not in KINDS:
            raise ValueError(f"unknown corruption kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if not 0 < self.fraction < 1:
            raise ValueError("fraction must lie in (0, 1)")
        if int(self.seed) < 0:
            raise ValueError("seed must be nonnegative")
        if self.fill is not None and self.fill not in FILLS:
            raise ValueError(f"unknown fill {self.fill!r}")

    @property
    def resolved_fill(self) -> str:
        if self.fill is not None:
            return self.fill
        return "random_binary" if self.kind == "salt_pepper" else "zeros"


def pixel_budget(fraction: float, height: int, width: int) -> int:
    return int(math.floor(fraction * height * width + 0.5))


def _block(b, h, w, rng):
    s = math.isqrt(b)
    s = min(s, h, w)
    r0 = int(rng.integers(0, h - s + 1))
    c0 = int(rng.integers(0, w - s + 1))
    mask = np.zeros((h, w), dtype=bool)
    mask[r0:r0 + s, c0:c0 + s] = True
    extra = b - s * s
    if extra:
        # Pad with the nearest pixels: the row below the square first (then
        # the row above, then side columns), scanning left to right.
        rr, cc = np.nonzero(~mask)
        dr = np.maximum(np.maximum(r0 - rr, rr - (r0 + s - 1)), 0)
        dc = np.maximum(np.maximum(c0 - cc, cc - (c0 + s - 1)), 0)
        order = np.lexsort((cc, rr, rr < r0, dr == 0, dr + dc))
        pick = order[:extra]
        mask[rr[pick], cc[pick]] = True
    return mask


def _cross(b, h, w, rng):
    t = 1
    while t * (h + w) - t * t < b:
        t += 1
    r0 = int(rng.integers(0, h - t + 1))
    c0 = int(rng.integers(0, w - t + 1))
    mask = np.zeros((h, w), dtype=bool)
    mask[r0:r0 + t, :] = True
    mask[:, c0:c0 + t] = True
    surplus = int(mask.sum()) - b
    if surplus:
        # Trim the bar ends farthest from the crossing point.
        rr, cc = np.nonzero(mask)
        rc, cm = r0 + (t - 1) / 2, c0 + (t - 1) / 2
        dist = np.maximum(np.abs(rr - rc), np.abs(cc - cm))
        order = np.lexsort((-(rr * w + cc), -dist))
        drop = order[:surplus]
        mask[rr[drop], cc[drop]] = False
    return mask


def make_mask(spec: CorruptionSpec, height: int, width: int, rng=None) -> np.ndarray:
    """Boolean mask of length ``height * width`` with exactly the pixel budget set.

    ``rng`` is a :class:`numpy.random.Generator`; by default one seeded with
    ``spec.seed``.
    """
    if height <= 0 or width <= 0:
        raise ValueError("image geometry must be positive")
    p = height * width
    b = pixel_budget(spec.fraction, height, width)
    if b <= 0:
        raise ValueError("pixel budget of 0 rejected; increase fraction")
    if b >= p:
        raise ValueError(f"pixel budget {b} covers the whole {height}x{width} image")
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    if spec.kind == "block":
        mask = _block(b, height, width, rng)
    elif spec.kind == "cross":
        mask = _cross(b, height, width, rng)
    else:
        mask = np.zeros(p, dtype=bool)
        mask[rng.choice(p, size=b, replace=False)] = True
    return mask.ravel()


def apply_corruption(data: LabeledDataset, spec: CorruptionSpec):
    """Corrupt every column with its own mask.

    Column ``j`` uses a generator seeded with ``spec.seed ^ j``. Masked
    pixels become 0 (``zeros``), 1 (``max``) or a fair coin flip of 0/1
    (``random_binary``); everything else is copied unchanged.

    Returns
    -------
    corrupted : LabeledDataset
    masks : ndarray of bool, shape (p, n)
    """
    x = np.array(data.data, dtype=np.float64)
    p, n = x.shape
    masks = np.zeros((p, n), dtype=bool)
    fill = spec.resolved_fill
    for j in range(n):
        rng = np.random.default_rng(spec.seed ^ j)
        mask = make_mask(spec, data.height, data.width, rng)
        masks[:, j] = mask
        k = int(mask.sum())
        if fill == "zeros":
            x[mask, j] = 0.0
        elif fill == "max":
            x[mask, j] = 1.0
        else:
            x[mask, j] = rng.integers(0, 2, size=k).astype(np.float64)
    return LabeledDataset(x, data.labels, data.height, data.width), masks
