"""The four classifier architectures, a MAC counter, and model serialization.

All builders target 3x64x64 inputs and 2 output logits (natural vs
artificial).  Channel widths are fixed here so every derived number (MAC
totals, parameter counts, modeled edge times) is reproducible.  The two
"lite" variants are honest scale-downs built from each family's canonical
block; their role is comparative, not a faithful reproduction of the
original networks.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np

from .layers import (
    BatchNorm,
    ChannelShuffle,
    Conv2d,
    GlobalAvgPool,
    GroupRecombine,
    Layer,
    Linear,
    MaxPool2x2,
    Relu,
    Relu6,
)
from .tensor import Rng, Tensor

INPUT_SHAPE = (3, 64, 64)
NUM_CLASSES = 2

MAGIC = b"OFW1"

DISPLAY_NAMES = {
    "bent_pipe": "Bent Pipe",
    "simple_cnn": "SimpleCNN",
    "mobilenet_v2_lite": "MobileNetV2",
    "shufflenet_lite": "ShuffleNet",
    "msnet": "MobileShuffleNet",
}


class Model:
    """Ordered layer stack with a train/eval mode flag."""

    def __init__(self, name: str, layers: list[Layer]):
        self.name = name
        self.layers = layers
        self.training = False

    def train_mode(self):
        self.training = True
        return self

    def eval_mode(self):
        self.training = False
        return self

    def forward(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = layer.forward(x, train=self.training)
        return x

    def backward(self, grad_logits: Tensor, need_input_grad: bool = True) -> Tensor | None:
        grad = grad_logits
        for index in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[index]
            if index == 0 and not need_input_grad and isinstance(layer, Conv2d):
                layer.backward(grad, need_input_grad=False)
                return None
            grad = layer.backward(grad)
        return grad

    def named_params(self) -> dict[str, Tensor]:
        out = {}
        for i, layer in enumerate(self.layers):
            for name, value in layer.params.items():
                out[f"layer{i:02d}.{layer.kind}.{name}"] = value
        return out

    def named_grads(self) -> dict[str, Tensor]:
        out = {}
        for i, layer in enumerate(self.layers):
            for name in layer.params:
                if name not in layer.grads:
                    raise RuntimeError(
                        f"no gradient for layer{i:02d}.{layer.kind}.{name}; "
                        "run backward first")
                out[f"layer{i:02d}.{layer.kind}.{name}"] = layer.grads[name]
        return out

    def set_params(self, named: dict[str, Tensor]):
        for i, layer in enumerate(self.layers):
            for name in layer.params:
                key = f"layer{i:02d}.{layer.kind}.{name}"
                if key in named:
                    layer.params[name] = named[key]

    def state_tensors(self) -> dict[str, Tensor]:
        """Parameters plus batch-norm running stats: everything eval needs."""
        out = dict(self.named_params())
        for i, layer in enumerate(self.layers):
            if isinstance(layer, BatchNorm):
                out[f"layer{i:02d}.batchnorm.running_mean"] = layer.running_mean
                out[f"layer{i:02d}.batchnorm.running_var"] = layer.running_var
        return out

    def load_state_tensors(self, named: dict[str, Tensor]):
        expected = self.state_tensors()
        missing = sorted(set(expected) - set(named))
        extra = sorted(set(named) - set(expected))
        if missing or extra:
            raise ValueError(
                f"state mismatch for {self.name}: missing {missing}, extra {extra}")
        for key, value in named.items():
            if value.shape != expected[key].shape:
                raise ValueError(
                    f"shape mismatch for {key}: expected {expected[key].shape}, "
                    f"got {value.shape}")
        for i, layer in enumerate(self.layers):
            for name in layer.params:
                layer.params[name] = named[f"layer{i:02d}.{layer.kind}.{name}"]
            if isinstance(layer, BatchNorm):
                layer.running_mean = named[f"layer{i:02d}.batchnorm.running_mean"]
                layer.running_var = named[f"layer{i:02d}.batchnorm.running_var"]

    def param_count(self) -> int:
        return sum(p.size for p in self.named_params().values())

    def __repr__(self):
        return f"Model({self.name!r}, {len(self.layers)} layers)"


def build_simple_cnn(rng: Rng | None = None) -> Model:
    """Three conv blocks, each conv + batchnorm + relu + 2x2 max pool."""
    rng = rng or Rng(0, "init")
    layers = []
    widths = [(3, 32), (32, 64), (64, 128)]
    for cin, cout in widths:
        layers += [
            Conv2d(cin, cout, 3, stride=1, pad=1, bias=False, rng=rng),
            BatchNorm(cout),
            Relu(),
            MaxPool2x2(),
        ]
    layers += [GlobalAvgPool(), Linear(128, NUM_CLASSES, rng=rng)]
    return Model("simple_cnn", layers)


def build_mobilenet_v2_lite(rng: Rng | None = None) -> Model:
    """Three sequential inverted-bottleneck stages (expand / depthwise / project)."""
    rng = rng or Rng(0, "init")

    def bottleneck(cin, expand, cout, stride):
        return [
            Conv2d(cin, expand, 1, bias=False, rng=rng),
            BatchNorm(expand),
            Relu6(),
            Conv2d(expand, expand, 3, stride=stride, pad=1, groups=expand,
                   bias=False, rng=rng),
            BatchNorm(expand),
            Relu6(),
            Conv2d(expand, cout, 1, bias=False, rng=rng),
            BatchNorm(cout),
        ]

    layers = [
        Conv2d(3, 16, 3, stride=2, pad=1, bias=False, rng=rng),
        BatchNorm(16),
        Relu6(),
    ]
    layers += bottleneck(16, 64, 24, stride=1)
    layers += bottleneck(24, 96, 32, stride=2)
    layers += bottleneck(32, 128, 64, stride=2)
    layers += [GlobalAvgPool(), Linear(64, NUM_CLASSES, rng=rng)]
    return Model("mobilenet_v2_lite", layers)


def build_shufflenet_lite(rng: Rng | None = None) -> Model:
    """Stem plus two grouped-pointwise / shuffle / depthwise units (G=3)."""
    rng = rng or Rng(0, "init")

    def unit(cin, mid, cout, stride):
        return [
            Conv2d(cin, mid, 1, groups=3, bias=False, rng=rng),
            BatchNorm(mid),
            Relu(),
            ChannelShuffle(3),
            Conv2d(mid, mid, 3, stride=stride, pad=1, groups=mid, bias=False, rng=rng),
            BatchNorm(mid),
            Conv2d(mid, cout, 1, groups=3, bias=False, rng=rng),
            BatchNorm(cout),
            Relu(),
        ]

    layers = [
        Conv2d(3, 24, 3, stride=2, pad=1, bias=False, rng=rng),
        BatchNorm(24),
        Relu(),
        MaxPool2x2(),
    ]
    layers += unit(24, 72, 144, stride=1)
    layers += unit(144, 144, 288, stride=2)
    layers += [GlobalAvgPool(), Linear(288, NUM_CLASSES, rng=rng)]
    return Model("shufflenet_lite", layers)


def build_msnet(rng: Rng | None = None) -> Model:
    """Depthwise-separable front end, grouped/shuffled middle, recombined head.

    Stem and the first two separable stages follow the mobile pattern
    (depthwise 3x3 then pointwise 1x1, batchnorm + relu6 after each); the
    later stages switch to grouped pointwise convolutions with channel
    shuffles, and a 4-group recombination layer fuses the shuffled groups
    before global pooling and the 2-way classifier.
    """
    rng = rng or Rng(0, "init")
    layers = [
        # stem: 3x64x64 -> 16x32x32
        Conv2d(3, 16, 3, stride=2, pad=1, bias=False, rng=rng),
        BatchNorm(16),
        Relu6(),
        # separable stage 1: 16x32x32 -> 32x32x32
        Conv2d(16, 16, 3, stride=1, pad=1, groups=16, bias=False, rng=rng),
        BatchNorm(16),
        Relu6(),
        Conv2d(16, 32, 1, bias=False, rng=rng),
        BatchNorm(32),
        Relu6(),
        # separable stage 2: 32x32x32 -> 64x16x16
        Conv2d(32, 32, 3, stride=2, pad=1, groups=32, bias=False, rng=rng),
        BatchNorm(32),
        Relu6(),
        Conv2d(32, 64, 1, bias=False, rng=rng),
        BatchNorm(64),
        Relu6(),
        # grouped stage: shuffle information across 4 groups
        Conv2d(64, 64, 1, groups=4, bias=False, rng=rng),
        BatchNorm(64),
        ChannelShuffle(4),
        Conv2d(64, 64, 3, stride=2, pad=1, groups=64, bias=False, rng=rng),
        BatchNorm(64),
        Conv2d(64, 128, 1, groups=4, bias=False, rng=rng),
        BatchNorm(128),
        Relu6(),
        ChannelShuffle(4),
        # fuse the shuffled groups into one 128-wide representation
        GroupRecombine(128, 128, groups=4, rng=rng),
        GlobalAvgPool(),
        Linear(128, NUM_CLASSES, rng=rng),
    ]
    return Model("msnet", layers)


BUILDERS = {
    "simple_cnn": build_simple_cnn,
    "mobilenet_v2_lite": build_mobilenet_v2_lite,
    "shufflenet_lite": build_shufflenet_lite,
    "msnet": build_msnet,
}


def build_model(arch: str, seed: int = 0) -> Model:
    """Build ``arch`` with its weight-init stream derived from ``seed``."""
    if arch not in BUILDERS:
        raise ValueError(f"unknown architecture {arch!r}, expected one of {sorted(BUILDERS)}")
    return BUILDERS[arch](Rng(seed, f"init:{arch}"))


@dataclass
class MacReport:
    """Per-layer multiply-accumulate counts for one image."""

    model_name: str
    per_layer: list[tuple[str, int]] = field(default_factory=list)
    total: int = 0
    param_count: int = 0

    def lines(self) -> list[str]:
        width = max(len(label) for label, _ in self.per_layer) if self.per_layer else 0
        out = [f"MACs per image for {self.model_name}:"]
        for label, macs in self.per_layer:
            out.append(f"  {label:<{width}}  {macs:>12,}")
        out.append(f"  {'TOTAL':<{width}}  {self.total:>12,}")
        out.append(f"  parameters: {self.param_count:,}")
        return out


def mac_count(model: Model, input_shape: tuple[int, int, int] = INPUT_SHAPE) -> MacReport:
    """Closed-form MAC count per image; shuffles, activations and pools are free."""
    report = MacReport(model_name=model.name)
    shape = tuple(input_shape)
    for i, layer in enumerate(model.layers):
        macs = int(layer.mac_cost(shape))
        report.per_layer.append((f"layer{i:02d} {layer!r}", macs))
        report.total += macs
        shape = layer.out_shape(shape)
    report.param_count = model.param_count()
    return report


def _write_record(buf, name: str, value: np.ndarray):
    raw = name.encode()
    buf.write(struct.pack("<Q", len(raw)))
    buf.write(raw)
    buf.write(struct.pack("<Q", value.ndim))
    buf.write(struct.pack(f"<{value.ndim}Q", *value.shape))
    buf.write(np.ascontiguousarray(value, dtype="<f8").tobytes())


def save_model(model: Model, path):
    """Write parameters and running stats as a flat little-endian container."""
    buf = io.BytesIO()
    buf.write(MAGIC)
    raw = model.name.encode()
    buf.write(struct.pack("<Q", len(raw)))
    buf.write(raw)
    buf.write(struct.pack("<Q", len(model.layers)))
    for name, value in model.state_tensors().items():
        _write_record(buf, name, value)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def _read_exact(fh, n: int, path) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise ValueError(f"truncated model file {path}")
    return data


def load_model(path) -> Model:
    """Rebuild the stored architecture and fill it with the stored tensors."""
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, path) != MAGIC:
            raise ValueError(f"{path} is not a model file (bad magic)")
        (name_len,) = struct.unpack("<Q", _read_exact(fh, 8, path))
        arch = _read_exact(fh, name_len, path).decode()
        (layer_count,) = struct.unpack("<Q", _read_exact(fh, 8, path))
        model = build_model(arch)
        if layer_count != len(model.layers):
            raise ValueError(
                f"{path}: layer count {layer_count} does not match "
                f"{arch} ({len(model.layers)})")
        named = {}
        while True:
            head = fh.read(8)
            if not head:
                break
            if len(head) != 8:
                raise ValueError(f"truncated model file {path}")
            (rec_len,) = struct.unpack("<Q", head)
            if rec_len > 4096:
                raise ValueError(f"corrupt record name length in {path}: {rec_len}")
            rec_name = _read_exact(fh, rec_len, path).decode()
            (rank,) = struct.unpack("<Q", _read_exact(fh, 8, path))
            if rank > 4:
                raise ValueError(f"corrupt tensor rank in {path}: {rank}")
            shape = struct.unpack(f"<{rank}Q", _read_exact(fh, 8 * rank, path))
            if any(s > 1 << 32 for s in shape):
                raise ValueError(f"corrupt tensor shape in {path}: {shape}")
            count = int(np.prod(shape)) if rank else 1
            values = np.frombuffer(_read_exact(fh, 8 * count, path), dtype="<f8")
            named[rec_name] = values.reshape(shape).astype(np.float64)
    model.load_state_tensors(named)
    return model.eval_mode()
