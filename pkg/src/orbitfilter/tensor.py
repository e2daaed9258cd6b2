"""Dense float64 tensors and deterministic, labeled random streams.

Every array in this package is a C-contiguous ``numpy.ndarray`` of 64-bit
floats in row-major (batch, channel, height, width) order.  The helpers here
enforce that contract at the boundaries; no operation in the package mutates
its inputs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from math import prod

import numpy as np

Tensor = np.ndarray

MAX_RANK = 4


def _validate_shape(shape) -> tuple[int, ...]:
    shape = tuple(int(s) for s in shape)
    if not 1 <= len(shape) <= MAX_RANK:
        raise ValueError(f"shape must have rank 1..{MAX_RANK}, got {shape}")
    if any(s < 1 for s in shape):
        raise ValueError(f"all extents must be >= 1, got {shape}")
    return shape


def tensor_create(shape, fill) -> Tensor:
    """Build a float64 tensor of ``shape`` from a scalar or a flat value list.

    A scalar fill is replicated; an array fill must contain exactly
    ``prod(shape)`` values and is laid out in row-major order.
    """
    shape = _validate_shape(shape)
    if np.isscalar(fill):
        return np.full(shape, float(fill), dtype=np.float64)
    data = np.asarray(fill, dtype=np.float64).ravel()
    expected = prod(shape)
    if data.size != expected:
        raise ValueError(
            f"fill length mismatch for shape {shape}: expected {expected} "
            f"values, got {data.size}"
        )
    return np.ascontiguousarray(data.reshape(shape))


_ZIP_OPS = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
}


def tensor_zip(a: Tensor, b: Tensor, op: str) -> Tensor:
    """Elementwise add/sub/mul of two same-shape tensors (no broadcasting)."""
    if op not in _ZIP_OPS:
        raise ValueError(f"unknown zip op {op!r}, expected one of {sorted(_ZIP_OPS)}")
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return _ZIP_OPS[op](a, b)


@dataclass(frozen=True)
class Uniform:
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"uniform requires lo <= hi, got [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class Normal:
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"normal requires sigma >= 0, got {self.sigma}")


class Rng:
    """Deterministic random stream addressed by ``(seed, label)``.

    Backed by the counter-based Philox generator keyed with a SHA-256 digest
    of seed and label, so the same pair yields the identical sequence on any
    platform and distinct labels give independent streams.
    """

    def __init__(self, seed: int, label: str):
        self.seed = int(seed)
        self.label = label
        digest = hashlib.sha256(f"{self.seed}\x1f{label}".encode()).digest()
        key = int.from_bytes(digest[:16], "little")
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def child(self, label: str) -> "Rng":
        """Derive an independent stream from this one's identity."""
        return Rng(self.seed, f"{self.label}/{label}")

    def uniform(self, lo: float, hi: float, shape=None) -> Tensor | float:
        if shape is None:
            return float(self._gen.uniform(lo, hi))
        return self._gen.uniform(lo, hi, size=shape).astype(np.float64)

    def normal(self, mu: float, sigma: float, shape=None) -> Tensor | float:
        if shape is None:
            return mu + sigma * float(self._gen.standard_normal())
        return (mu + sigma * self._gen.standard_normal(size=shape)).astype(np.float64)

    def integers(self, lo: int, hi: int, shape=None):
        """Integers in the half-open range [lo, hi)."""
        out = self._gen.integers(lo, hi, size=shape)
        return int(out) if shape is None else out

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, options):
        return options[self.integers(0, len(options))]

    def __repr__(self):
        return f"Rng(seed={self.seed}, label={self.label!r})"


def tensor_random(shape, dist, rng: Rng) -> Tensor:
    """Sample a tensor from ``dist`` (Uniform or Normal) using ``rng``."""
    shape = _validate_shape(shape)
    if isinstance(dist, Uniform):
        if dist.lo == dist.hi:
            return np.full(shape, dist.lo, dtype=np.float64)
        return rng.uniform(dist.lo, dist.hi, shape)
    if isinstance(dist, Normal):
        return rng.normal(dist.mu, dist.sigma, shape)
    raise ValueError(f"unknown distribution {dist!r}")
