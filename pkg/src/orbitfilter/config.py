"""Experiment configuration: a flat ``key = value`` text format.

Grammar: one ``dotted.key = value`` per line, ``#`` starts a comment, blank
lines are ignored.  Every key has a default, so the empty document is a valid
config.  Unknown keys, type mismatches and out-of-range values are rejected
with the offending key path.  ``render_config`` emits the fully resolved
document, which re-parses to an equal config.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .datasets import ARTIFICIAL, NATURAL, UCMERCED_CLASSES
from .link import LinkParams, calibrate, link_from_bandwidth
from .models import BUILDERS
from .pipeline import DEFAULT_MAC_RATE

MODES = ("bent_pipe", "edge_filter")

# Affine link fitted to the published (420, 3.96) and (272, 2.61) pairs.
DEFAULT_LINK = calibrate([(420, 3.96), (272, 2.61)])


class ConfigError(ValueError):
    """Config problem carrying the offending key path."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class DatasetSection:
    source: str = "synthetic"            # synthetic | directory
    path: str = ""
    n_synthetic: int = 2100
    train_fraction: float = 0.8


@dataclass
class TrainingSection:
    epochs: int = 25
    lr: float = 0.001
    batch: int = 32
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class LinkSection:
    base_latency_s: float = DEFAULT_LINK.base_latency_s
    per_image_s: float = DEFAULT_LINK.per_image_s
    jitter_std_s: float = 0.0
    # alternative payload/bandwidth form; converted into per_image_s
    bytes_per_image: float = 0.0
    bandwidth_bytes_per_s: float = 0.0
    per_image_overhead_s: float = 0.0


@dataclass
class EdgeSection:
    arch: str = "msnet"
    mac_rate: float = DEFAULT_MAC_RATE


@dataclass
class ExperimentConfig:
    seed: int = 0
    dataset: DatasetSection = field(default_factory=DatasetSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    link: LinkSection = field(default_factory=LinkSection)
    edge: EdgeSection = field(default_factory=EdgeSection)
    modes: tuple[str, ...] = MODES
    binarization: dict[str, str] = field(default_factory=dict)

    def link_params(self) -> LinkParams:
        """Resolve the link section (either form) into LinkParams."""
        if self.link.bytes_per_image or self.link.bandwidth_bytes_per_s:
            return link_from_bandwidth(
                self.link.bytes_per_image,
                self.link.bandwidth_bytes_per_s,
                base_latency_s=self.link.base_latency_s,
                per_image_overhead_s=self.link.per_image_overhead_s,
                jitter_std_s=self.link.jitter_std_s,
                seed=self.seed,
            )
        return LinkParams(
            base_latency_s=self.link.base_latency_s,
            per_image_s=self.link.per_image_s,
            jitter_std_s=self.link.jitter_std_s,
            seed=self.seed,
        )


def _parse_int(key, raw, lo=None, hi=None):
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(key, f"expected an integer, got {raw!r}") from None
    if lo is not None and value < lo:
        raise ConfigError(key, f"must be >= {lo}, got {value}")
    if hi is not None and value > hi:
        raise ConfigError(key, f"must be <= {hi}, got {value}")
    return value


def _parse_float(key, raw, lo=None, hi=None, exclusive_lo=False, exclusive_hi=False):
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(key, f"expected a number, got {raw!r}") from None
    if lo is not None and (value <= lo if exclusive_lo else value < lo):
        op = ">" if exclusive_lo else ">="
        raise ConfigError(key, f"must be {op} {lo}, got {value}")
    if hi is not None and (value >= hi if exclusive_hi else value > hi):
        op = "<" if exclusive_hi else "<="
        raise ConfigError(key, f"must be {op} {hi}, got {value}")
    return value


def _parse_choice(key, raw, options):
    if raw not in options:
        raise ConfigError(key, f"expected one of {sorted(options)}, got {raw!r}")
    return raw


def parse_config(text: str) -> ExperimentConfig:
    """Parse and fully default a config document."""
    cfg = ExperimentConfig()
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key in seen:
            raise ConfigError(key, "duplicate key")
        seen.add(key)
        _apply(cfg, key, raw)

    both = {"link.per_image_s", "link.bytes_per_image"} <= seen
    if both:
        raise ConfigError("link.per_image_s",
                          "give either per_image_s or the bytes/bandwidth form, not both")
    if ("link.bytes_per_image" in seen) != ("link.bandwidth_bytes_per_s" in seen):
        raise ConfigError("link.bytes_per_image",
                          "bytes_per_image and bandwidth_bytes_per_s go together")
    if "link.per_image_overhead_s" in seen and "link.bytes_per_image" not in seen:
        raise ConfigError("link.per_image_overhead_s",
                          "only meaningful with the bytes/bandwidth form")
    if cfg.dataset.source == "directory" and not cfg.dataset.path:
        raise ConfigError("dataset.path", "required when dataset.source = directory")
    cfg.link_params()                     # validate ranges of the resolved link
    return cfg


def _apply(cfg: ExperimentConfig, key: str, raw: str):
    if key == "seed":
        cfg.seed = _parse_int(key, raw, lo=0)
    elif key == "dataset.source":
        cfg.dataset.source = _parse_choice(key, raw, ("synthetic", "directory"))
    elif key == "dataset.path":
        cfg.dataset.path = raw
    elif key == "dataset.n_synthetic":
        cfg.dataset.n_synthetic = _parse_int(key, raw, lo=2)
    elif key == "dataset.train_fraction":
        cfg.dataset.train_fraction = _parse_float(key, raw, lo=0.0, hi=1.0,
                                                  exclusive_lo=True, exclusive_hi=True)
    elif key == "training.epochs":
        cfg.training.epochs = _parse_int(key, raw, lo=0)
    elif key == "training.lr":
        cfg.training.lr = _parse_float(key, raw, lo=0.0, exclusive_lo=True)
    elif key == "training.batch":
        cfg.training.batch = _parse_int(key, raw, lo=1)
    elif key == "training.beta1":
        cfg.training.beta1 = _parse_float(key, raw, lo=0.0, hi=1.0, exclusive_hi=True)
    elif key == "training.beta2":
        cfg.training.beta2 = _parse_float(key, raw, lo=0.0, hi=1.0, exclusive_hi=True)
    elif key == "training.eps":
        cfg.training.eps = _parse_float(key, raw, lo=0.0, exclusive_lo=True)
    elif key == "link.base_latency_s":
        cfg.link.base_latency_s = _parse_float(key, raw, lo=0.0)
    elif key == "link.per_image_s":
        cfg.link.per_image_s = _parse_float(key, raw, lo=0.0, exclusive_lo=True)
    elif key == "link.jitter_std_s":
        cfg.link.jitter_std_s = _parse_float(key, raw, lo=0.0)
    elif key == "link.bytes_per_image":
        cfg.link.bytes_per_image = _parse_float(key, raw, lo=0.0, exclusive_lo=True)
    elif key == "link.bandwidth_bytes_per_s":
        cfg.link.bandwidth_bytes_per_s = _parse_float(key, raw, lo=0.0, exclusive_lo=True)
    elif key == "link.per_image_overhead_s":
        cfg.link.per_image_overhead_s = _parse_float(key, raw, lo=0.0)
    elif key == "edge.arch":
        cfg.edge.arch = _parse_choice(key, raw, tuple(BUILDERS))
    elif key == "edge.mac_rate":
        cfg.edge.mac_rate = _parse_float(key, raw, lo=0.0, exclusive_lo=True)
    elif key == "modes":
        modes = tuple(m.strip() for m in raw.split(",") if m.strip())
        if not modes:
            raise ConfigError(key, "at least one mode required")
        for m in modes:
            if m not in MODES:
                raise ConfigError(key, f"unknown mode {m!r}, expected {MODES}")
        if len(set(modes)) != len(modes):
            raise ConfigError(key, f"duplicate modes in {modes}")
        cfg.modes = modes
    elif key.startswith("binarization."):
        class_name = key.split(".", 1)[1]
        if class_name not in UCMERCED_CLASSES:
            raise ConfigError(key, f"unknown scene class {class_name!r}")
        cfg.binarization[class_name] = _parse_choice(key, raw, (NATURAL, ARTIFICIAL))
    else:
        raise ConfigError(key, "unknown key")


def render_config(cfg: ExperimentConfig) -> str:
    """Emit the fully resolved document; parse(render(cfg)) == cfg."""
    lines = [
        "# orbitfilter resolved experiment config",
        f"seed = {cfg.seed}",
        f"dataset.source = {cfg.dataset.source}",
    ]
    if cfg.dataset.path:
        lines.append(f"dataset.path = {cfg.dataset.path}")
    lines += [
        f"dataset.n_synthetic = {cfg.dataset.n_synthetic}",
        f"dataset.train_fraction = {cfg.dataset.train_fraction!r}",
        f"training.epochs = {cfg.training.epochs}",
        f"training.lr = {cfg.training.lr!r}",
        f"training.batch = {cfg.training.batch}",
        f"training.beta1 = {cfg.training.beta1!r}",
        f"training.beta2 = {cfg.training.beta2!r}",
        f"training.eps = {cfg.training.eps!r}",
        f"link.base_latency_s = {cfg.link.base_latency_s!r}",
    ]
    if cfg.link.bytes_per_image or cfg.link.bandwidth_bytes_per_s:
        resolved = cfg.link_params()
        lines += [
            f"link.bytes_per_image = {cfg.link.bytes_per_image!r}",
            f"link.bandwidth_bytes_per_s = {cfg.link.bandwidth_bytes_per_s!r}",
            f"link.per_image_overhead_s = {cfg.link.per_image_overhead_s!r}",
            f"# resolved per-image cost: {resolved.per_image_s!r} s",
        ]
    else:
        lines.append(f"link.per_image_s = {cfg.link.per_image_s!r}")
    lines += [
        f"link.jitter_std_s = {cfg.link.jitter_std_s!r}",
        f"edge.arch = {cfg.edge.arch}",
        f"edge.mac_rate = {cfg.edge.mac_rate!r}",
        f"modes = {', '.join(cfg.modes)}",
    ]
    for class_name in sorted(cfg.binarization):
        lines.append(f"binarization.{class_name} = {cfg.binarization[class_name]}")
    return "\n".join(lines) + "\n"
