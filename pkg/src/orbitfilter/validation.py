"""Input validation helpers for the estimator-facing API."""

from __future__ import annotations

import numpy as np

from .datasets import IMAGE_SIZE, LabeledImage

N_FEATURES = 3 * IMAGE_SIZE * IMAGE_SIZE


def check_image_batch(X) -> np.ndarray:
    """Coerce to an (n, 3, 64, 64) float64 batch in [-1, 1].

    Accepts either the image layout or flattened (n, 12288) rows.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        if X.shape[1] != N_FEATURES:
            raise ValueError(
                f"flattened images need {N_FEATURES} features, got {X.shape[1]}")
        X = X.reshape(len(X), 3, IMAGE_SIZE, IMAGE_SIZE)
    elif X.ndim != 4 or X.shape[1:] != (3, IMAGE_SIZE, IMAGE_SIZE):
        raise ValueError(
            f"expected (n, 3, {IMAGE_SIZE}, {IMAGE_SIZE}) or (n, {N_FEATURES}), "
            f"got {X.shape}")
    if len(X) == 0:
        raise ValueError("empty image batch")
    if not np.all(np.isfinite(X)):
        raise ValueError("images contain non-finite values")
    if X.min() < -1.0 or X.max() > 1.0:
        raise ValueError(
            f"pixel values must lie in [-1, 1], got range "
            f"[{X.min():.3f}, {X.max():.3f}]")
    return X


def check_binary_labels(y, n: int) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {y.shape}")
    values = set(np.unique(y).tolist())
    if not values <= {0, 1}:
        raise ValueError(f"labels must be 0 (natural) or 1 (artificial), got {sorted(values)}")
    return y.astype(np.intp)


def batch_to_samples(X: np.ndarray, y=None) -> list[LabeledImage]:
    labels = np.zeros(len(X), dtype=np.intp) if y is None else y
    return [LabeledImage(pixels=x, label=int(label), origin="array")
            for x, label in zip(X, labels)]
