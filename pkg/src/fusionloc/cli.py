"""``fusionloc`` command line: generate / train / eval / plot / ablate.

Exit codes: 0 success, 2 configuration error, 3 I/O or dataset error,
4 numeric divergence.
"""
from __future__ import annotations

import argparse
import hashlib
import logging
import subprocess
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .config import RunConfig, dump_config, load_config
from .data.io import dataset_hash, find_norm, load_dataset, load_world, read_norm
from .data.transforms import DEFAULT_MEAN, DEFAULT_STD
from .errors import ConfigError, DatasetFormatError, DivergenceError
from .metrics import read_eval_dump, write_eval_dump
from .training import (
    PoseDataset,
    config_hash,
    grid_cells,
    load_checkpoint,
    predict,
    run_ablation,
    train,
    write_ablation_table,
)

log = logging.getLogger("fusionloc")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_DIVERGED = 0, 2, 3, 4
MANIFEST = "manifest.txt"


def version_string() -> str:
    """``git describe`` of the source tree when available, else the package version."""
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"v{__version__}-g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return f"v{__version__}"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(out_dir, command: str, started: str, config_text: str = "", data_hash: str = "", extra=None) -> Path:
    """One ``manifest.txt`` per output directory: run facts, then the full config snapshot."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = [
        "[manifest]",
        f"command = {command}",
        f"version = {version_string()}",
        f"dataset_hash = {data_hash or 'none'}",
        f"config_hash = {hashlib.sha256(config_text.encode()).hexdigest()[:16] if config_text else 'none'}",
    ]
    for k, v in (extra or {}).items():
        lines.append(f"{k} = {v}")
    lines += [f"started = {started}", f"finished = {_now()}", ""]
    path = out / MANIFEST
    path.write_text("\n".join(lines) + config_text, encoding="utf-8")
    return path


def _norm_for(data_dir):
    p = find_norm(data_dir)
    if p is None:
        log.warning("no norm.txt above %s; using default image statistics", data_dir)
        return DEFAULT_MEAN, DEFAULT_STD
    return read_norm(p)


def _require_dir(path, what) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise FileNotFoundError(f"{what} not found: {p}")
    return p


def summary_table(seqs) -> str:
    width = max([8, *(len(s.id) for s in seqs)])
    rows = [f"{'sequence':<{width}}  {'frames':>6}  split"]
    rows += [f"{s.id:<{width}}  {len(s):>6}  {s.split}" for s in seqs]
    rows.append(f"{'total':<{width}}  {sum(len(s) for s in seqs):>6}")
    return "\n".join(rows)


def cmd_generate(args) -> int:
    from .data.io import generate_dataset

    started = _now()
    cfg = load_config(args.config)
    out = Path(args.out)
    seqs = generate_dataset(out, cfg.world, cfg.dataset.specs(), cfg.dataset.set_id)
    print(summary_table(seqs))
    h = dataset_hash(out)
    write_manifest(out, "generate", started, dump_config(cfg), h)
    print(f"dataset hash {h}")
    return EXIT_OK


def cmd_train(args) -> int:
    started = _now()
    cfg = load_config(args.config)
    data = _require_dir(args.data, "data directory")
    seqs = load_dataset(data)
    train_seqs = [s for s in seqs if s.split == "train"]
    eval_seqs = [s for s in seqs if s.split == "eval"]
    if not train_seqs:
        raise DatasetFormatError(f"no training sequences under {data}")
    res = train(
        train_seqs,
        cfg.train,
        cfg.model,
        eval_sequences=eval_seqs or None,
        out_dir=args.out,
        resume=args.resume,
        norm=_norm_for(data),
    )
    for epoch, rep in sorted(res.reports.items()):
        print(f"epoch {epoch}: median {rep.average.median_pos_m:.3f} m / {rep.average.median_ori_deg:.2f} deg")
    extra = {
        "model_config_hash": config_hash(res.state.model_cfg, cfg.train),
        "steps": res.state.step,
        "epochs": res.state.epoch,
        "resumed_from": args.resume or "none",
    }
    write_manifest(args.out, "train", started, dump_config(cfg), dataset_hash(data), extra)
    last = res.history[-1] if res.history else None
    if last:
        print(f"step {last[0]}: loss {last[1]:.4f} beta {last[2]:.4f} gamma {last[3]:.4f}")
    print(f"checkpoint written to {res.checkpoint}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .metrics import evaluate

    started = _now()
    state = load_checkpoint(_require_dir(args.ckpt, "checkpoint directory"))
    data = _require_dir(args.data, "data directory")
    seqs = load_dataset(data, "eval") or load_dataset(data)
    if not seqs:
        raise DatasetFormatError(f"no sequences under {data}")
    mean, std = _norm_for(data)
    pred, gt, ids, frames = predict(state.model, PoseDataset(seqs, state.model_cfg, mean, std))
    report = evaluate(pred, gt, ids)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write(out / "report.txt")
    write_eval_dump(out / "eval_dump.csv", ids, frames, gt, pred)
    print(report.format_table())
    cfg = RunConfig(model=state.model_cfg, train=state.train_cfg)
    write_manifest(out, "eval", started, dump_config(cfg), dataset_hash(data), {"checkpoint": Path(args.ckpt).resolve()})
    return EXIT_OK


def cmd_plot(args) -> int:
    from .plotting import parse_size, plot_eval_dump

    started = _now()
    try:
        size = parse_size(args.size)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    dump_path = Path(args.dump)
    if not dump_path.is_file():
        raise FileNotFoundError(f"eval dump not found: {dump_path}")
    dump = read_eval_dump(dump_path)
    world = load_world(args.map) if args.map else None
    out = Path(args.out)
    stem = out / "error_map" if out.is_dir() or args.out.endswith(("/", "\\")) else out
    pos_map, ori_map = plot_eval_dump(dump, stem, size, world)
    print(f"{pos_map.path} ({int(pos_map.outliers.sum())} position outliers)")
    print(f"{ori_map.path} ({int(ori_map.outliers.sum())} orientation outliers)")
    facts = {"dump": dump_path.resolve(), "size": f"{size[0]}x{size[1]}"}
    existing = pos_map.path.parent / MANIFEST
    if existing.exists() and "command = plot\n" not in existing.read_text(encoding="utf-8"):
        # plots dropped next to another command's outputs extend that manifest
        # (replacing the [plot] block of an earlier plot run)
        text = existing.read_text(encoding="utf-8").split("\n[plot]\n")[0].rstrip("\n") + "\n"
        block = ["", "[plot]", *(f"{k} = {v}" for k, v in facts.items()), f"started = {started}", f"finished = {_now()}", ""]
        existing.write_text(text + "\n".join(block), encoding="utf-8")
    else:
        write_manifest(pos_map.path.parent, "plot", started, extra=facts)
    return EXIT_OK


def cmd_ablate(args) -> int:
    started = _now()
    cfg = load_config(args.config)
    data = _require_dir(args.data, "data directory")
    seqs = load_dataset(data)
    train_seqs = [s for s in seqs if s.split == "train"]
    eval_seqs = [s for s in seqs if s.split == "eval"]
    if not train_seqs or not eval_seqs:
        raise DatasetFormatError(f"ablation needs train and eval sequences under {data}")

    def ints(text):
        return tuple(int(v) for v in text.split(","))

    cells = grid_cells(
        ints(args.d_I), ints(args.d_P), ints(args.heads), ints(args.layers), tuple(args.norm.split(",")), cfg.model.kind
    )
    rows = run_ablation(cells, train_seqs, eval_seqs, cfg.train, cfg.model, _norm_for(data))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_ablation_table(rows, out / "ablation.tsv")
    print((out / "ablation.tsv").read_text(encoding="utf-8"), end="")
    write_manifest(out, "ablate", started, dump_config(cfg), dataset_hash(data), {"cells": len(cells)})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fusionloc", description="Camera + 2D lidar pose regression toolkit.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="render a synthetic dataset")
    g.add_argument("--config", required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train a model")
    t.add_argument("--config", required=True)
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--resume", help="checkpoint directory to continue from")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on the eval split")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)

    p = sub.add_parser("plot", help="draw position / orientation error maps")
    p.add_argument("--dump", required=True, help="eval_dump.csv written by 'eval'")
    p.add_argument("--out", required=True, help="output directory or file stem")
    p.add_argument("--size", default="800x600", help="WIDTHxHEIGHT in pixels")
    p.add_argument("--map", help="world.json to draw under the markers")
    p.set_defaults(func=cmd_plot)

    a = sub.add_parser("ablate", help="train and evaluate over a grid of fusion settings")
    a.add_argument("--config", required=True)
    a.add_argument("--data", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--d-I", dest="d_I", default="256")
    a.add_argument("--d-P", dest="d_P", default="256")
    a.add_argument("--heads", default="2")
    a.add_argument("--layers", default="6")
    a.add_argument("--norm", default="BN")
    a.set_defaults(func=cmd_ablate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (OSError, DatasetFormatError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
