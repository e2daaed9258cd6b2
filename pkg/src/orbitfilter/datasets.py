"""Labeled 3x64x64 image sources.

Two sources are supported: a deterministic synthetic generator that mimics
the artificial-vs-natural decision (sharp rectangles, gratings and grids vs
smoothed low-frequency noise), and a loader for a class-per-directory tree of
binary P6 pixmaps with a 21-class to binary mapping.  All pixels end up
normalized to [-1, 1] via (value - 0.5) / 0.5.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass

import numpy as np

from .tensor import Rng, Tensor

IMAGE_SIZE = 64

NATURAL = "natural"
ARTIFICIAL = "artificial"

UCMERCED_CLASSES = (
    "agricultural", "airplane", "baseballdiamond", "beach", "buildings",
    "chaparral", "denseresidential", "forest", "freeway", "golfcourse",
    "harbor", "intersection", "mediumresidential", "mobilehomepark",
    "overpass", "parkinglot", "river", "runway", "sparseresidential",
    "storagetanks", "tenniscourt",
)

_NATURAL_CLASSES = frozenset(
    {"agricultural", "beach", "chaparral", "forest", "golfcourse", "river"})


@dataclass
class LabeledImage:
    """Normalized image with its binary label; 1 = artificial, 0 = natural."""

    pixels: Tensor          # (3, 64, 64) in [-1, 1]
    label: int
    origin: str


@dataclass(frozen=True)
class BinarizationMap:
    """Mapping from scene-class names to the binary label names."""

    classes: dict[str, str]

    def __post_init__(self):
        bad = {c: v for c, v in self.classes.items() if v not in (NATURAL, ARTIFICIAL)}
        if bad:
            raise ValueError(f"labels must be '{NATURAL}' or '{ARTIFICIAL}': {bad}")

    def label_of(self, class_name: str) -> int:
        return 1 if self.classes[class_name] == ARTIFICIAL else 0

    def override(self, changes: dict[str, str]) -> "BinarizationMap":
        unknown = sorted(set(changes) - set(self.classes))
        if unknown:
            raise ValueError(f"unknown classes in binarization override: {unknown}")
        merged = dict(self.classes)
        merged.update(changes)
        return BinarizationMap(merged)


def default_binarization() -> BinarizationMap:
    """Six vegetation/water classes map to natural, the other fifteen to artificial."""
    return BinarizationMap({
        name: (NATURAL if name in _NATURAL_CLASSES else ARTIFICIAL)
        for name in UCMERCED_CLASSES
    })


def normalize(pixels01: Tensor) -> Tensor:
    """Map [0, 1] pixel values to [-1, 1]."""
    return (np.clip(pixels01, 0.0, 1.0) - 0.5) / 0.5


def _box_blur(img: Tensor, radius: int) -> Tensor:
    """Separable box blur with edge replication, one pass per axis."""
    k = 2 * radius + 1
    for axis in (1, 2):
        padded = np.concatenate(
            [np.repeat(img.take([0], axis=axis), radius, axis=axis),
             img,
             np.repeat(img.take([-1], axis=axis), radius, axis=axis)],
            axis=axis)
        csum = np.cumsum(padded, axis=axis)
        zero = np.zeros_like(csum.take([0], axis=axis))
        csum = np.concatenate([zero, csum], axis=axis)
        hi = csum.take(range(k, csum.shape[axis]), axis=axis)
        lo = csum.take(range(0, csum.shape[axis] - k), axis=axis)
        img = (hi - lo) / k
    return img


def _natural_image(rng: Rng) -> Tensor:
    noise = rng.uniform(0.0, 1.0, (3, IMAGE_SIZE, IMAGE_SIZE))
    smooth = _box_blur(_box_blur(noise, 3), 3)
    # recenter and stretch the flattened noise, then tint toward vegetation
    gain = rng.uniform(2.0, 4.0)
    field = (smooth - smooth.mean(axis=(1, 2), keepdims=True)) * gain
    tint = np.array([
        rng.uniform(0.22, 0.40),
        rng.uniform(0.35, 0.55),
        rng.uniform(0.18, 0.34),
    ])
    img = tint[:, None, None] + field
    return np.clip(img, 0.0, 1.0)


def _artificial_image(rng: Rng) -> Tensor:
    # per-channel base drawn wide enough to overlap the natural tints, so
    # color alone does not separate the classes; texture has to
    base = np.array([
        rng.uniform(0.22, 0.54),
        rng.uniform(0.24, 0.52),
        rng.uniform(0.18, 0.50),
    ])
    img = np.broadcast_to(base[:, None, None], (3, IMAGE_SIZE, IMAGE_SIZE)).copy()
    img += rng.normal(0.0, 0.03, (3, IMAGE_SIZE, IMAGE_SIZE))

    def rand_span(lo_size, hi_size):
        size = rng.integers(lo_size, hi_size + 1)
        start = rng.integers(0, IMAGE_SIZE - size + 1)
        return start, start + size

    for _ in range(rng.integers(2, 6)):
        shade = rng.choice([rng.uniform(0.0, 0.25), rng.uniform(0.75, 1.0)])
        kind = rng.choice(["rect", "outline", "grating", "grid"])
        if kind == "rect":
            y0, y1 = rand_span(8, 28)
            x0, x1 = rand_span(8, 28)
            img[:, y0:y1, x0:x1] = shade
        elif kind == "outline":
            y0, y1 = rand_span(12, 32)
            x0, x1 = rand_span(12, 32)
            t = rng.integers(1, 3)
            img[:, y0:y1, x0:x0 + t] = shade
            img[:, y0:y1, x1 - t:x1] = shade
            img[:, y0:y0 + t, x0:x1] = shade
            img[:, y1 - t:y1, x0:x1] = shade
        else:
            period = rng.integers(3, 9)
            width = rng.integers(1, min(3, period))
            phase = rng.integers(0, period)
            idx = np.arange(IMAGE_SIZE)
            stripe = (idx + phase) % period < width
            y0, y1 = rand_span(24, 56)
            x0, x1 = rand_span(24, 56)
            if kind == "grating":
                if rng.integers(0, 2):
                    img[:, y0:y1, x0:x1][:, stripe[y0:y1], :] = shade
                else:
                    img[:, y0:y1, x0:x1][:, :, stripe[x0:x1]] = shade
            else:
                img[:, y0:y1, x0:x1][:, stripe[y0:y1], :] = shade
                img[:, y0:y1, x0:x1][:, :, stripe[x0:x1]] = shade
    return np.clip(img, 0.0, 1.0)


def generate_synthetic(n: int, rng: Rng) -> list[LabeledImage]:
    """Balanced synthetic set: n//2 artificial (odd-index) + the rest natural."""
    if n < 2:
        raise ValueError(f"need at least 2 synthetic samples, got {n}")
    images = []
    for i in range(n):
        label = i % 2            # artificial on odd positions -> exactly n//2
        child = rng.child(f"img{i}")
        if label == 1:
            pixels = _artificial_image(child)
            origin = "synthetic_artificial"
        else:
            pixels = _natural_image(child)
            origin = "synthetic_natural"
        images.append(LabeledImage(normalize(pixels), label, origin))
    return images


def resize_bilinear(img: Tensor, target: int = IMAGE_SIZE) -> Tensor:
    """Half-pixel-centered bilinear resampling of a (C, H, W) image.

    A same-size call is an exact pass-through.
    """
    c, h, w = img.shape
    if h == target and w == target:
        return img.copy()

    def axis_coords(src: int):
        sample = (np.arange(target) + 0.5) * (src / target) - 0.5
        sample = np.clip(sample, 0.0, src - 1.0)
        lo = np.floor(sample).astype(np.intp)
        hi = np.minimum(lo + 1, src - 1)
        frac = sample - lo
        return lo, hi, frac

    y0, y1, fy = axis_coords(h)
    x0, x1, fx = axis_coords(w)
    rows0 = img[:, y0, :] * (1 - fy)[None, :, None] + img[:, y1, :] * fy[None, :, None]
    out = (rows0[:, :, x0] * (1 - fx)[None, None, :]
           + rows0[:, :, x1] * fx[None, None, :])
    return out


def decode_ppm(path) -> Tensor:
    """Decode a binary P6 pixmap (maxval 255) to a (3, H, W) array in [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()

    pos = 0

    def next_token():
        nonlocal pos
        while pos < len(data):
            ch = data[pos:pos + 1]
            if ch == b"#":
                while pos < len(data) and data[pos:pos + 1] != b"\n":
                    pos += 1
            elif ch.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"malformed pixmap header in {path}: unexpected end of file")
        return data[start:pos]

    if next_token() != b"P6":
        raise ValueError(f"malformed pixmap header in {path}: not a P6 file")
    try:
        width = int(next_token())
        height = int(next_token())
        maxval = int(next_token())
    except ValueError as exc:
        raise ValueError(f"malformed pixmap header in {path}: {exc}") from None
    if width < 1 or height < 1:
        raise ValueError(f"malformed pixmap header in {path}: bad size {width}x{height}")
    if maxval != 255:
        raise ValueError(f"unsupported pixmap {path}: maxval must be 255, got {maxval}")
    pos += 1                                 # single whitespace after maxval
    expected = width * height * 3
    raw = data[pos:pos + expected]
    if len(raw) != expected:
        raise ValueError(
            f"truncated pixmap {path}: expected {expected} bytes, got {len(raw)}")
    pixels = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3)
    return pixels.transpose(2, 0, 1).astype(np.float64) / 255.0


def load_directory(path, bin_map: BinarizationMap) -> list[LabeledImage]:
    """Load ``<path>/<classname>/*.ppm``, resize to 64x64, normalize, label.

    Unknown class directories are an error; mapped classes missing from disk
    only produce a warning.
    """
    entries = sorted(e for e in os.listdir(path)
                     if os.path.isdir(os.path.join(path, e)))
    unknown = sorted(set(entries) - set(bin_map.classes))
    if unknown:
        raise ValueError(f"class directories not in binarization map: {unknown}")
    missing = sorted(set(bin_map.classes) - set(entries))
    if missing:
        warnings.warn(f"classes in map but absent on disk: {missing}", stacklevel=2)

    images = []
    for class_name in entries:
        class_dir = os.path.join(path, class_name)
        label = bin_map.label_of(class_name)
        for fname in sorted(os.listdir(class_dir)):
            if not fname.endswith(".ppm"):
                continue
            pixels = decode_ppm(os.path.join(class_dir, fname))
            pixels = resize_bilinear(pixels, IMAGE_SIZE)
            images.append(LabeledImage(normalize(pixels), label, class_name))
    if not images:
        warnings.warn(f"no images found under {path}", stacklevel=2)
    return images
