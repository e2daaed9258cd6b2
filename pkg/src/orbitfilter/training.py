"""Loss, optimizer, training loop, dataset split, and classification metrics."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .models import Model
from .tensor import Rng, Tensor


def softmax_cross_entropy(logits: Tensor, labels) -> tuple[float, Tensor]:
    """Mean negative log-softmax likelihood and its gradient wrt the logits.

    Stabilized by max subtraction; gradient is (softmax - onehot) / N.
    """
    labels = np.asarray(labels, dtype=np.intp)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {labels.shape}")
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"labels must lie in [0, {k}), got range "
                         f"[{labels.min()}, {labels.max()}]")
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(exp.sum(axis=1, keepdims=True))
    loss = float(-log_probs[np.arange(n), labels].mean())
    grad = probs
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


class Adam:
    """Adam with bias correction; state is kept per parameter name."""

    def __init__(self, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, Tensor] = {}
        self.v: dict[str, Tensor] = {}

    def step(self, params: dict[str, Tensor], grads: dict[str, Tensor]) -> dict[str, Tensor]:
        """Return updated parameters; inputs are left untouched."""
        self.t += 1
        out = {}
        for name, p in params.items():
            g = grads[name]
            if not np.all(np.isfinite(g)):
                raise ValueError(f"non-finite gradient for parameter {name!r}")
            m = self.m.get(name)
            if m is None:
                m = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            v = self.v[name]
            m = self.beta1 * m + (1 - self.beta1) * g
            v = self.beta2 * v + (1 - self.beta2) * g * g
            self.m[name], self.v[name] = m, v
            m_hat = m / (1 - self.beta1 ** self.t)
            v_hat = v / (1 - self.beta2 ** self.t)
            out[name] = p - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return out


@dataclass
class Metrics:
    """Binary confusion counts and derived ratios; positive = artificial."""

    tp: int
    fp: int
    fn: int
    tn: int
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0
    accuracy: float = 0.0
    degenerate: list[str] = field(default_factory=list)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def compute_metrics(tp: int, fp: int, fn: int, tn: int) -> Metrics:
    """Closed-form precision/recall/F1/accuracy with flagged empty denominators."""
    m = Metrics(tp=tp, fp=fp, fn=fn, tn=tn)
    if tp + fp > 0:
        m.precision = tp / (tp + fp)
    else:
        m.degenerate.append("precision")
    if tp + fn > 0:
        m.recall = tp / (tp + fn)
    else:
        m.degenerate.append("recall")
    if m.precision + m.recall > 0:
        m.f1 = 2 * m.precision * m.recall / (m.precision + m.recall)
    else:
        m.degenerate.append("f1")
    if m.total > 0:
        m.accuracy = (tp + tn) / m.total
    else:
        m.degenerate.append("accuracy")
    return m


def metrics_from_predictions(predicted, actual) -> Metrics:
    predicted = np.asarray(predicted)
    actual = np.asarray(actual)
    tp = int(np.sum((predicted == 1) & (actual == 1)))
    fp = int(np.sum((predicted == 1) & (actual == 0)))
    fn = int(np.sum((predicted == 0) & (actual == 1)))
    tn = int(np.sum((predicted == 0) & (actual == 0)))
    return compute_metrics(tp, fp, fn, tn)


def split_dataset(samples: list, train_fraction: float, rng: Rng) -> tuple[list, list]:
    """Uniform shuffle then prefix split into (train, test)."""
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    order = rng.permutation(len(samples))
    n_train = int(np.floor(len(samples) * train_fraction + 1e-9))
    shuffled = [samples[i] for i in order]
    return shuffled[:n_train], shuffled[n_train:]


@dataclass
class EpochStats:
    loss: float
    accuracy: float


@dataclass
class TrainConfig:
    epochs: int = 25
    lr: float = 0.001
    batch_size: int = 32
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0


def _stack_batch(samples) -> tuple[Tensor, np.ndarray]:
    x = np.stack([s.pixels for s in samples])
    y = np.array([s.label for s in samples], dtype=np.intp)
    return x, y


def train_model(model: Model, train_set: list, config: TrainConfig,
                log=None) -> tuple[Model, list[EpochStats]]:
    """Train in place with Adam on shuffled mini-batches; returns eval-mode model.

    Deterministic for a fixed config: the shuffle order comes from the
    labeled stream (seed, "shuffle:<arch>") and batches are visited in
    sequence.  History has exactly ``config.epochs`` entries.
    """
    if not train_set:
        raise ValueError("empty training set")
    labels = {s.label for s in train_set}
    if not labels <= {0, 1}:
        raise ValueError(f"labels must be 0 or 1, got {sorted(labels)}")

    optimizer = Adam(lr=config.lr, beta1=config.beta1, beta2=config.beta2,
                     eps=config.eps)
    shuffle_rng = Rng(config.seed, f"shuffle:{model.name}")
    history: list[EpochStats] = []
    n = len(train_set)

    model.train_mode()
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        t0 = time.perf_counter()
        for start in range(0, n, config.batch_size):
            batch = [train_set[i] for i in order[start:start + config.batch_size]]
            x, y = _stack_batch(batch)
            logits = model.forward(x)
            loss, grad = softmax_cross_entropy(logits, y)
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"training diverged: non-finite loss at epoch {epoch + 1}")
            model.backward(grad, need_input_grad=False)
            model.set_params(optimizer.step(model.named_params(), model.named_grads()))
            loss_sum += loss * len(batch)
            correct += int(np.sum(logits.argmax(axis=1) == y))
        stats = EpochStats(loss=loss_sum / n, accuracy=correct / n)
        history.append(stats)
        if log is not None:
            log(f"epoch {epoch + 1:>2}/{config.epochs}  loss {stats.loss:.4f}  "
                f"train acc {stats.accuracy:.4f}  ({time.perf_counter() - t0:.1f}s)")
    model.eval_mode()
    return model, history


def evaluate(model: Model, test_set: list, batch_size: int = 128) -> tuple[Metrics, list[int]]:
    """Eval-mode predictions and confusion metrics; never mutates the model.

    Prediction is the argmax of the logits with ties resolved toward the
    lower class index.
    """
    if model.training:
        raise ValueError("evaluate requires the model in eval mode")
    preds: list[int] = []
    actual: list[int] = []
    for start in range(0, len(test_set), batch_size):
        batch = test_set[start:start + batch_size]
        x, y = _stack_batch(batch)
        logits = model.forward(x)
        preds.extend(int(p) for p in logits.argmax(axis=1))
        actual.extend(int(v) for v in y)
    return metrics_from_predictions(preds, actual), preds
