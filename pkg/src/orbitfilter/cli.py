"""Command-line entry points.

Subcommands: ``run`` (full experiment), ``train`` (train and save a model),
``simulate`` (link-only transmission times), ``macs`` (per-layer MAC report),
``calibrate`` (fit link parameters from count/seconds pairs).

Seed precedence: config file < ORBITFILTER_SEED environment variable <
``--seed`` flag.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import ConfigError, ExperimentConfig, parse_config, render_config
from .datasets import default_binarization, generate_synthetic, load_directory
from .link import calibrate
from .models import BUILDERS, build_model, mac_count, save_model
from .pipeline import compare, run_bent_pipe, run_edge_filter, simulate_transmissions
from .report import render_csv, render_table
from .tensor import Rng
from .training import TrainConfig, split_dataset, train_model

SEED_ENV_VAR = "ORBITFILTER_SEED"


def _load_config(path: str | None, seed_flag: int | None) -> ExperimentConfig:
    if path:
        with open(path, encoding="utf-8") as fh:
            cfg = parse_config(fh.read())
    else:
        cfg = parse_config("")
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        try:
            cfg.seed = int(env_seed)
        except ValueError:
            raise ConfigError(SEED_ENV_VAR, f"expected an integer, got {env_seed!r}")
    if seed_flag is not None:
        cfg.seed = seed_flag
    return cfg


def _load_dataset(cfg: ExperimentConfig, log):
    if cfg.dataset.source == "synthetic":
        log(f"generating {cfg.dataset.n_synthetic} synthetic images")
        return generate_synthetic(cfg.dataset.n_synthetic, Rng(cfg.seed, "synth"))
    bin_map = default_binarization().override(cfg.binarization)
    log(f"loading pixmaps from {cfg.dataset.path}")
    return load_directory(cfg.dataset.path, bin_map)


def _train_edge_model(cfg: ExperimentConfig, train_set, log):
    arch = cfg.edge.arch
    model = build_model(arch, seed=cfg.seed)
    train_cfg = TrainConfig(
        epochs=cfg.training.epochs,
        lr=cfg.training.lr,
        batch_size=cfg.training.batch,
        beta1=cfg.training.beta1,
        beta2=cfg.training.beta2,
        eps=cfg.training.eps,
        seed=cfg.seed,
    )
    log(f"training {arch}: {len(train_set)} images, {train_cfg.epochs} epochs, "
        f"lr {train_cfg.lr}, batch {train_cfg.batch_size}")
    model, history = train_model(model, train_set, train_cfg, log=log)
    return model, history


def cmd_run(cfg: ExperimentConfig, out_dir: str, log=print) -> dict[str, str]:
    """Full experiment: split, train, evaluate, compare, render.

    Returns the paths of the written artifacts.
    """
    os.makedirs(out_dir, exist_ok=True)
    samples = _load_dataset(cfg, log)
    train_set, test_set = split_dataset(samples, cfg.dataset.train_fraction,
                                        Rng(cfg.seed, "split"))
    log(f"split: {len(train_set)} train / {len(test_set)} test")

    link = cfg.link_params()
    model = None
    reports = []
    for mode in cfg.modes:
        if mode == "bent_pipe":
            reports.append(run_bent_pipe(test_set, link))
        else:
            if model is None:
                model, _ = _train_edge_model(cfg, train_set, log)
            report = run_edge_filter(test_set, model, link, cfg.edge.mac_rate)
            log(f"edge filter wall clock: {report.edge_wall_clock_s:.3f}s "
                f"(modeled {report.edge_time_s:.3f}s)")
            reports.append(report)

    table = compare(reports)
    paths = {
        "csv": os.path.join(out_dir, "report.csv"),
        "md": os.path.join(out_dir, "report.md"),
        "config": os.path.join(out_dir, "resolved-config.txt"),
    }
    with open(paths["csv"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_csv(table))
    with open(paths["md"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_table(table))
    with open(paths["config"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_config(cfg))
    if model is not None:
        paths["model"] = os.path.join(out_dir, f"model-{cfg.edge.arch}.ofw")
        save_model(model, paths["model"])
    log(render_table(table))
    log(f"artifacts written to {out_dir}")
    return paths


def cmd_train(cfg: ExperimentConfig, out_dir: str, log=print) -> dict[str, str]:
    """Train the configured architecture and save it; no link simulation."""
    os.makedirs(out_dir, exist_ok=True)
    samples = _load_dataset(cfg, log)
    train_set, _ = split_dataset(samples, cfg.dataset.train_fraction,
                                 Rng(cfg.seed, "split"))
    model, history = _train_edge_model(cfg, train_set, log)
    paths = {
        "model": os.path.join(out_dir, f"model-{cfg.edge.arch}.ofw"),
        "config": os.path.join(out_dir, "resolved-config.txt"),
    }
    save_model(model, paths["model"])
    with open(paths["config"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_config(cfg))
    if history:
        log(f"final epoch: loss {history[-1].loss:.4f}, "
            f"train accuracy {history[-1].accuracy:.4f}")
    log(f"model written to {paths['model']}")
    return paths


def _parse_point(raw: str) -> tuple[int, float]:
    try:
        n, t = raw.split(":")
        return int(n), float(t)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected COUNT:SECONDS, got {raw!r}") from None


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="orbitfilter",
        description="Edge-filter vs bent-pipe satellite downlink simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="experiment config file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed")

    p_run = sub.add_parser("run", help="full experiment with report")
    add_common(p_run)
    p_train = sub.add_parser("train", help="train and save the edge model")
    add_common(p_train)

    p_sim = sub.add_parser("simulate", help="transmission times for image counts")
    p_sim.add_argument("counts", nargs="+", type=int)
    p_sim.add_argument("--config", help="config supplying the link parameters")
    p_sim.add_argument("--seed", type=int, help="override the config seed")

    p_macs = sub.add_parser("macs", help="per-layer MAC report")
    p_macs.add_argument("arch", nargs="?", choices=sorted(BUILDERS),
                        help="architecture (default: all)")

    p_cal = sub.add_parser("calibrate", help="fit link parameters")
    p_cal.add_argument("--point", action="append", type=_parse_point, required=True,
                       metavar="COUNT:SECONDS", dest="points",
                       help="observed pair, repeat at least twice")

    args = parser.parse_args(argv)
    try:
        if args.command in ("run", "train"):
            cfg = _load_config(args.config, args.seed)
            handler = cmd_run if args.command == "run" else cmd_train
            handler(cfg, args.out)
        elif args.command == "simulate":
            cfg = _load_config(args.config, args.seed)
            print("images,transmission_time_s")
            for n, total in simulate_transmissions(args.counts, cfg.link_params()):
                print(f"{n},{total:.4f}")
        elif args.command == "macs":
            archs = [args.arch] if args.arch else sorted(BUILDERS)
            for arch in archs:
                report = mac_count(build_model(arch))
                print("\n".join(report.lines()))
        elif args.command == "calibrate":
            params = calibrate(args.points)
            print(f"link.base_latency_s = {params.base_latency_s!r}")
            print(f"link.per_image_s = {params.per_image_s!r}")
    except (ConfigError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
