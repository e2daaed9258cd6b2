"""Deterministic satellite-ground downlink model.

Transmission of n images costs a fixed session overhead plus an affine
per-image term with optional clamped Gaussian jitter.  The affine law is what
the published (count, seconds) pairs support; packet-level detail would be
invented precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Rng


@dataclass(frozen=True)
class LinkParams:
    """Affine downlink: total = base + sum of per-image costs."""

    base_latency_s: float
    per_image_s: float
    jitter_std_s: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.base_latency_s < 0:
            raise ValueError(f"base latency must be >= 0, got {self.base_latency_s}")
        if self.per_image_s <= 0:
            raise ValueError(f"per-image cost must be > 0, got {self.per_image_s}")
        if self.jitter_std_s < 0:
            raise ValueError(f"jitter std must be >= 0, got {self.jitter_std_s}")


def link_from_bandwidth(bytes_per_image: float, bandwidth_bytes_per_s: float,
                        base_latency_s: float, per_image_overhead_s: float = 0.0,
                        jitter_std_s: float = 0.0, seed: int = 0) -> LinkParams:
    """Convert a payload/bandwidth description into the affine form."""
    if bytes_per_image <= 0 or bandwidth_bytes_per_s <= 0:
        raise ValueError("payload size and bandwidth must be positive")
    return LinkParams(
        base_latency_s=base_latency_s,
        per_image_s=bytes_per_image / bandwidth_bytes_per_s + per_image_overhead_s,
        jitter_std_s=jitter_std_s,
        seed=seed,
    )


@dataclass(frozen=True)
class TransmitRecord:
    count: int
    timestamps: tuple[float, ...]
    total_s: float


def transmit(n: int, params: LinkParams) -> TransmitRecord:
    """Simulate sending ``n`` images; n = 0 means no session at all.

    Each image costs max(0, per_image + jitter) so timelines stay monotone;
    the jitter stream is re-derived from (seed, "jitter") on every call, so
    identical inputs always produce the identical record.
    """
    if n < 0:
        raise ValueError(f"image count must be >= 0, got {n}")
    if n == 0:
        return TransmitRecord(count=0, timestamps=(), total_s=0.0)
    if params.jitter_std_s > 0:
        jitter = Rng(params.seed, "jitter").normal(0.0, params.jitter_std_s, (n,))
    else:
        jitter = np.zeros(n)
    costs = np.maximum(0.0, params.per_image_s + jitter)
    stamps = params.base_latency_s + np.cumsum(costs)
    return TransmitRecord(count=n, timestamps=tuple(stamps), total_s=float(stamps[-1]))


def calibrate(points: list[tuple[int, float]], jitter_std_s: float = 0.0,
              seed: int = 0) -> LinkParams:
    """Least-squares affine fit of (image count, seconds) pairs.

    With exactly two distinct counts this is exact interpolation.
    """
    if len(points) < 2:
        raise ValueError("calibration needs at least 2 (count, seconds) points")
    ns = np.array([float(n) for n, _ in points])
    ts = np.array([float(t) for _, t in points])
    if np.all(ns == ns[0]):
        raise ValueError("calibration needs at least two distinct image counts")
    n_mean, t_mean = ns.mean(), ts.mean()
    b = float(np.sum((ns - n_mean) * (ts - t_mean)) / np.sum((ns - n_mean) ** 2))
    a = float(t_mean - b * n_mean)
    return LinkParams(base_latency_s=a, per_image_s=b,
                      jitter_std_s=jitter_std_s, seed=seed)


def predict_total(n: int, params: LinkParams) -> float:
    """Jitter-free expected total for ``n`` images."""
    return 0.0 if n == 0 else params.base_latency_s + n * params.per_image_s
