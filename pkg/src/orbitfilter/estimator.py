"""Scikit-learn compatible front end for the edge classifiers.

Wraps the builder + training loop in the estimator protocol so the models
drop into pipelines, grid search and cross-validation.  X is either an
(n, 3, 64, 64) image batch or flattened (n, 12288) rows, with pixel values
already normalized to [-1, 1]; y holds binary labels (1 = artificial).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .models import BUILDERS, build_model
from .training import TrainConfig, train_model
from .validation import batch_to_samples, check_binary_labels, check_image_batch


class CnnClassifier(BaseEstimator, ClassifierMixin):
    """Binary artificial-vs-natural image classifier.

    Parameters mirror the experiment defaults: 25 epochs of Adam at lr 0.001
    on shuffled mini-batches of 32.  Training is deterministic for a fixed
    seed.
    """

    def __init__(self, arch="msnet", epochs=25, lr=0.001, batch_size=32,
                 beta1=0.9, beta2=0.999, eps=1e-8, seed=0, verbose=False):
        self.arch = arch
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.seed = seed
        self.verbose = verbose

    def fit(self, X, y):
        if self.arch not in BUILDERS:
            raise ValueError(f"unknown arch {self.arch!r}, expected one of {sorted(BUILDERS)}")
        X = check_image_batch(X)
        y = check_binary_labels(y, len(X))
        config = TrainConfig(
            epochs=self.epochs, lr=self.lr, batch_size=self.batch_size,
            beta1=self.beta1, beta2=self.beta2, eps=self.eps, seed=self.seed)
        model = build_model(self.arch, seed=self.seed)
        log = print if self.verbose else None
        model, history = train_model(model, batch_to_samples(X, y), config, log=log)
        self.model_ = model
        self.history_ = history
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X[0].size
        return self

    def _logits(self, X, batch_size=128) -> np.ndarray:
        if not hasattr(self, "model_"):
            raise RuntimeError("this CnnClassifier instance is not fitted yet")
        X = check_image_batch(X)
        chunks = [self.model_.forward(X[i:i + batch_size])
                  for i in range(0, len(X), batch_size)]
        return np.concatenate(chunks, axis=0)

    def decision_function(self, X) -> np.ndarray:
        logits = self._logits(X)
        return logits[:, 1] - logits[:, 0]

    def predict_proba(self, X) -> np.ndarray:
        logits = self._logits(X)
        shifted = logits - logits.max(axis=1, keepdims=True)
        exp = np.exp(shifted)
        return exp / exp.sum(axis=1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        return self._logits(X).argmax(axis=1)
