"""Command-line entry point: ``ntlgen <subcommand> ...``.

Exit status is 0 on success, 1 on data/training/format errors and 2 on
usage or configuration errors.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import shutil
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import __version__
from .errors import ConfigError, DataError, FormatError, NtlError, ShapeError, TrainingDivergedError
from .evaluation import evaluate_pairs
from .geo.dataset import (
    compute_suitability,
    list_cell_ids,
    load_examples,
    read_bundle,
    read_split,
    read_suitable,
    split_dataset,
    write_bundle,
    write_grid,
    write_split,
    write_suitable,
)
from .geo.grid import CELL_SPAN, CONUS_BBOX, partition_grid
from .geo.ingest import SOURCE_CHANNELS, ingest, read_flat_raster
from .geo.preprocess import SUITABILITY_THRESHOLD
from .geo.tiles import TileBundle, stack_scenario
from .model.checkpoint import load_checkpoint
from .model.params import default_specs
from .model.specs import SCENARIO_CHANNELS, PatchGANSpec, ScenarioConfig, TrainConfig, UNetSpec
from .model.training import train, translate
from .synthetic import SceneParams, generate_dataset

log = logging.getLogger("ntlgen")

THREADS_ENV = "NTLGEN_THREADS"


class UsageError(ConfigError):
    pass


def _parse_bbox(text: str) -> tuple[float, float, float, float]:
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("bbox must be lat_min,lat_max,lon_min,lon_max")
    try:
        return tuple(float(p) for p in parts)  # type: ignore[return-value]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bbox values must be numbers: {text!r}") from None


def _prepare_out(path: Path, overwrite: bool) -> None:
    """Create an empty output directory, replacing an existing one only with --overwrite."""
    if path.exists() and (not path.is_dir() or any(path.iterdir())):
        if not overwrite:
            raise UsageError(f"{path} exists and is not empty; pass --overwrite to replace it")
        if path.is_dir():
            shutil.rmtree(path)
        else:
            path.unlink()
    path.mkdir(parents=True, exist_ok=True)


def _require_dir(path: Path, what: str) -> None:
    if not path.is_dir():
        raise DataError(f"{what} {path} does not exist")


def _require_file(path: Path, what: str) -> None:
    if not path.is_file():
        raise DataError(f"{what} {path} does not exist")


# subcommands ------------------------------------------------------------------


def cmd_synth(args) -> int:
    out = Path(args.out)
    if out.exists() and any(out.iterdir()) and not args.overwrite:
        raise UsageError(f"{out} exists and is not empty; pass --overwrite to replace it")
    params = SceneParams(size=args.size, seed=args.seed, sm_signal_share=args.sm_share)
    ids = generate_dataset(out, args.n, params, seed=args.seed, overwrite=args.overwrite)
    print(json.dumps({"dataset": str(out), "n_tiles": len(ids)}))
    return 0


def cmd_grid(args) -> int:
    grid = partition_grid(args.bbox, args.span)
    write_grid(Path(args.out), grid)
    print(json.dumps({"rows": grid.rows, "cols": grid.cols, "n_cells": grid.n_cells}))
    return 0


def cmd_select(args) -> int:
    ds = Path(args.dataset)
    _require_dir(ds, "dataset")
    suit = compute_suitability(ds, args.threshold)
    write_suitable(ds, suit)
    print(json.dumps({"threshold": suit.threshold, "n_suitable": len(suit.cell_ids), "n_tiles": len(suit.sums)}))
    return 0


def cmd_split(args) -> int:
    ds = Path(args.dataset)
    _require_file(ds / "suitable.json", "suitability manifest")
    split = split_dataset(read_suitable(ds), args.train, args.val, args.seed)
    write_split(ds, split)
    print(json.dumps({"seed": split.seed, **split.counts()}))
    return 0


def cmd_ingest(args) -> int:
    ds = Path(args.dataset)
    _require_file(ds / "grid.json", "grid manifest")
    sources = {}
    for item in args.raster:
        name, _, path = item.partition("=")
        if name not in SOURCE_CHANNELS or not path:
            raise UsageError(f"--raster expects NAME=PATH with NAME in {SOURCE_CHANNELS}, got {item!r}")
        _require_file(Path(path), "raster")
        sources[name] = read_flat_raster(path)
    from .geo.dataset import read_grid

    bundles = ingest(read_grid(ds), sources, args.size)
    for b in bundles:
        write_bundle(ds, b)
    print(json.dumps({"n_tiles": len(bundles)}))
    return 0


def _specs_for(arch: str, scenario: ScenarioConfig, tile_size: int) -> tuple[UNetSpec, PatchGANSpec]:
    c = scenario.n_channels
    if arch == "pix2pix":
        return UNetSpec(input_channels=c), PatchGANSpec(input_channels=c + 1)
    if arch == "desk":
        return UNetSpec.desk(c), PatchGANSpec.desk(c + 1)
    return default_specs(scenario, tile_size)


def cmd_train(args) -> int:
    ds = Path(args.dataset)
    _require_file(ds / "split.json", "split manifest")
    scenario = ScenarioConfig.from_name(args.scenario)
    if args.steps is None and args.epochs is None:
        raise UsageError("train needs --steps or --epochs")
    config = TrainConfig(
        lam=args.lam,
        steps=args.steps,
        epochs=args.epochs,
        lr_g=args.lr,
        lr_d=args.lr,
        seed=args.seed,
        checkpoint_every=args.checkpoint_every,
    )
    out = Path(args.out)
    _prepare_out(out, args.overwrite)
    examples = load_examples(ds, scenario, "train")
    if not examples:
        raise DataError(f"dataset {ds} has no training tiles")
    unet, patchgan = _specs_for(args.arch, scenario, examples[0].condition.shape[-1])
    log.info("training %s on %d tiles", scenario.name, len(examples))
    result = train(examples, scenario, config, unet, patchgan, out_dir=out)
    summary = {
        "scenario": scenario.name,
        "steps": len(result.history),
        "seed": args.seed,
        "lambda": args.lam,
        "lr": args.lr,
        "arch": args.arch,
        "final": {k: float(v) for k, v in vars(result.history[-1]).items() if k != "step"} if result.history else None,
    }
    (out / "train.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps({"checkpoint": str(out / "checkpoint.ntl"), "steps": len(result.history)}))
    return 0


def cmd_translate(args) -> int:
    ckpt, ds = Path(args.checkpoint), Path(args.dataset)
    _require_file(ckpt, "checkpoint")
    _require_dir(ds, "dataset")
    model = load_checkpoint(ckpt)
    if args.split == "all":
        ids = list_cell_ids(ds)
    else:
        _require_file(ds / "split.json", "split manifest")
        ids = read_split(ds).ids(args.split)
    if not ids:
        raise DataError(f"no tiles in split {args.split!r} of {ds}")
    out = Path(args.out)
    _prepare_out(out, args.overwrite)
    for cid in ids:
        bundle = read_bundle(ds, cid)
        missing = [c for c in model.scenario.channels if c not in bundle.channels]
        if missing:
            raise ConfigError(f"checkpoint scenario {model.scenario.name} needs channels {missing} absent from tile {cid}")
        stacked = stack_scenario(bundle, model.scenario, require_target=False)
        result = translate(model, stacked.condition, seed=args.seed)
        pred = TileBundle(cid, bundle.bbox)
        pred.add("night", result.radiance)
        write_bundle(out, pred)
    meta = {"scenario": model.scenario.name, "checkpoint": ckpt.name, "split": args.split, "seed": args.seed, "cell_ids": ids}
    (out / "translate.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(json.dumps({"n_tiles": len(ids), "out": str(out)}))
    return 0


def cmd_evaluate(args) -> int:
    pred, truth = Path(args.pred), Path(args.truth)
    _require_dir(pred, "prediction directory")
    _require_dir(truth, "ground-truth directory")
    report = evaluate_pairs(pred, truth, args.scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write(out)
    print(json.dumps(report.summary()))
    return 0


# parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ntlgen", description="Multispectral-to-nighttime translation toolkit")
    p.add_argument("--version", action="version", version=f"ntlgen {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    s = sub.add_parser("synth", help="generate a synthetic paired dataset")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--size", type=int, default=64)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--sm-share", type=float, default=0.3)
    s.add_argument("--overwrite", action="store_true")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("grid", help="partition a bounding box into grid cells")
    s.add_argument("--bbox", type=_parse_bbox, default=CONUS_BBOX, help="lat_min,lat_max,lon_min,lon_max")
    s.add_argument("--span", type=float, default=CELL_SPAN)
    s.add_argument("--out", required=True, help="dataset directory receiving grid.json")
    s.set_defaults(func=cmd_grid)

    s = sub.add_parser("ingest", help="cut flat rasters into tile bundles on the dataset grid")
    s.add_argument("--dataset", required=True)
    s.add_argument("--raster", action="append", required=True, help=f"NAME=PATH, NAME in {', '.join(SOURCE_CHANNELS)}")
    s.add_argument("--size", type=int, default=256)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("select", help="mark cells whose total radiance reaches the threshold")
    s.add_argument("--dataset", required=True)
    s.add_argument("--threshold", type=float, default=SUITABILITY_THRESHOLD)
    s.set_defaults(func=cmd_select)

    s = sub.add_parser("split", help="seeded train/validation split of suitable cells")
    s.add_argument("--dataset", required=True)
    s.add_argument("--train", type=int, default=800)
    s.add_argument("--val", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("train", help="train the conditional GAN for one scenario")
    s.add_argument("--dataset", required=True)
    s.add_argument("--scenario", required=True, choices=sorted(SCENARIO_CHANNELS))
    g = s.add_mutually_exclusive_group()
    g.add_argument("--steps", type=int)
    g.add_argument("--epochs", type=int)
    s.add_argument("--lr", type=float, default=2e-4)
    s.add_argument("--lambda", dest="lam", type=float, default=100.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--arch", choices=("auto", "pix2pix", "desk"), default="auto")
    s.add_argument("--checkpoint-every", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--overwrite", action="store_true")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("translate", help="generate nighttime rasters with a checkpoint")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--dataset", required=True)
    s.add_argument("--split", choices=("train", "validation", "all"), default="validation")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--overwrite", action="store_true")
    s.set_defaults(func=cmd_translate)

    s = sub.add_parser("evaluate", help="D_eu, D_ma and R_ncc of predictions against ground truth")
    s.add_argument("--pred", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--scenario", default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_evaluate)
    return p


def _thread_limit():
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return contextlib.nullcontext()
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return threadpool_limits(limits=n)


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    resolved = {k: v for k, v in vars(args).items() if k != "func"}
    log.info("config %s", json.dumps(resolved, default=str, sort_keys=True))
    try:
        with _thread_limit():
            return args.func(args)
    except (ConfigError, ShapeError) as exc:
        print(f"ntlgen {args.command}: {exc}", file=sys.stderr)
        return 2
    except (DataError, FormatError, TrainingDivergedError, NtlError, OSError) as exc:
        print(f"ntlgen {args.command}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
